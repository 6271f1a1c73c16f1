//! Factoring a target through an injective feature map: `g = u∘F` on `K`.

use serde::{Deserialize, Serialize};

use crate::domain::SampledCompactSet;
use crate::error::{Error, Result};
use crate::features::{check_injectivity, FeatureVectorMap, InjectivityReport};

/// `u` tabulated on the image `F(K)` and extended to all of `R^n` by
/// nearest-image lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedComposition {
    pub images: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl EmbeddedComposition {
    /// Index of the nearest image point (Euclidean); ties go to the
    /// lexicographically smallest image.
    pub fn nearest(&self, y: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, img) in self.images.iter().enumerate() {
            let d: f64 = img.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            let closer = d < best_d
                || (d == best_d && lex_less(img, &self.images[best]));
            if closer {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.values[self.nearest(y)].clone()
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

/// Tabulates `u` on `F(K)` with `u(F(x)) = g(x)`; fails with the first
/// coincident pair when `F` is not injective on the sample.
pub fn compose_via_embedding(
    targets: &[Vec<f64>],
    set: &SampledCompactSet,
    map: &FeatureVectorMap,
) -> Result<(EmbeddedComposition, InjectivityReport)> {
    if targets.len() != set.len() {
        return Err(Error::LengthMismatch {
            expected: set.len(),
            got: targets.len(),
        });
    }
    let report = check_injectivity(map, set)?;
    if let Some((first, second)) = report.witness {
        return Err(Error::InjectivityFailure { first, second });
    }
    let images = map.eval_all(set.points())?;
    Ok((
        EmbeddedComposition {
            images,
            values: targets.to_vec(),
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Metric;
    use crate::features::Feature;

    #[test]
    fn identity_reproduces_targets() {
        let set = SampledCompactSet::grid(0.0, 1.0, 4, 2, Metric::Euclidean).unwrap();
        let g: Vec<Vec<f64>> = set.points().iter().map(|p| vec![p[0] * p[1], p[0]]).collect();
        let (u, rep) = compose_via_embedding(&g, &set, &FeatureVectorMap::identity(2)).unwrap();
        assert!(rep.injective);
        for (p, v) in set.points().iter().zip(&g) {
            assert_eq!(&u.eval(p), v);
        }
    }

    #[test]
    fn ties_go_to_smallest_image() {
        let u = EmbeddedComposition {
            images: vec![vec![1.0], vec![-1.0]],
            values: vec![vec![10.0], vec![20.0]],
        };
        assert_eq!(u.eval(&[0.0]), vec![20.0]);
        assert_eq!(u.eval(&[0.9]), vec![10.0]);
    }

    #[test]
    fn even_map_fails() {
        let set = SampledCompactSet::new(vec![vec![-0.5], vec![0.0], vec![0.5]], Metric::Euclidean, 0.0).unwrap();
        let sq = Feature::custom(set.points(), &[0.25, 0.0, 0.25]);
        let err = compose_via_embedding(&vec![vec![0.0]; 3], &set, &FeatureVectorMap::new(vec![sq])).unwrap_err();
        assert_eq!(err, Error::InjectivityFailure { first: 0, second: 2 });
    }
}
