//! k-nearest-neighbour label averaging over standardized descriptors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// k-NN configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnSpec {
    pub k: usize,
}

impl Default for KnnSpec {
    fn default() -> Self {
        KnnSpec { k: 5 }
    }
}

/// The stored neighbourhood: standardized descriptors with their label
/// vectors. `k` is the effective count after any clamping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl KnnParams {
    pub fn new(k: usize, x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Result<KnnParams> {
        if x.is_empty() || x.len() != y.len() || k == 0 {
            return Err(Error::DegenerateInput(format!(
                "knn needs k ≥ 1 and matching non-empty stores, got k {k}, {} points, {} labels",
                x.len(),
                y.len()
            )));
        }
        if k > x.len() {
            return Err(Error::DegenerateInput(format!(
                "knn k {k} exceeds stored record count {}",
                x.len()
            )));
        }
        Ok(KnnParams { k, x, y })
    }

    /// Mean label vector over the `k` nearest stored points, Euclidean
    /// distance, ties broken by (distance, index) so the answer is
    /// independent of any internal ordering choices.
    pub fn predict(&self, q: &[f64]) -> Result<Vec<f64>> {
        let dim = self.x[0].len();
        if q.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: q.len(),
                context: "knn query".into(),
            });
        }
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let outputs = self.y[0].len();
        let mut mean = vec![0.0; outputs];
        for &(_, i) in dist.iter().take(self.k) {
            for (m, v) in mean.iter_mut().zip(&self.y[i]) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= self.k as f64;
        }
        Ok(mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![5.0, 5.0],
        ];
        let y = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![0.0, 0.0],
        ];
        (x, y)
    }

    #[test]
    fn k1_returns_the_nearest_record_label() {
        let (x, y) = store();
        let knn = KnnParams::new(1, x, y).unwrap();
        assert_eq!(knn.predict(&[0.1, -0.1]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(knn.predict(&[4.0, 4.9]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn k_equal_to_count_is_the_global_mean_everywhere() {
        let (x, y) = store();
        let knn = KnnParams::new(4, x, y).unwrap();
        let global = vec![0.5, 0.5];
        for q in [[0.0, 0.0], [100.0, -3.0], [2.5, 2.5]] {
            assert_eq!(knn.predict(&q).unwrap(), global);
        }
    }

    #[test]
    fn distance_ties_break_by_lower_index() {
        // Two stored points equidistant from the query but with
        // different labels: the lower index must win at k = 1.
        let x = vec![vec![1.0], vec![-1.0]];
        let y = vec![vec![1.0], vec![0.0]];
        let knn = KnnParams::new(1, x, y).unwrap();
        assert_eq!(knn.predict(&[0.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let (x, y) = store();
        assert!(KnnParams::new(0, x.clone(), y.clone()).is_err());
        assert!(KnnParams::new(9, x.clone(), y.clone()).is_err());
        assert!(KnnParams::new(2, x.clone(), y[..2].to_vec()).is_err());
        let knn = KnnParams::new(2, x, y).unwrap();
        assert!(knn.predict(&[1.0]).is_err());
    }
}
