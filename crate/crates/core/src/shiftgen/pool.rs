//! Tasks resampled from an annotated pool.

use rand::Rng as _;

use super::{quantify_shifts, GroupCounts, Provenance, Sample, TaskDataset};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// A labelled, attributed sample pool indexed by group.
#[derive(Debug, Clone)]
pub struct GroupedPool {
    pub id: String,
    samples: Vec<Sample>,
    by_group: [Vec<usize>; 4],
}

impl GroupedPool {
    /// Index a sample collection by group. Fails on empty input or
    /// inconsistent feature lengths.
    pub fn new(id: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::DegenerateInput("empty pool".into()));
        }
        let p = samples[0].x.len();
        let mut by_group: [Vec<usize>; 4] = Default::default();
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: s.x.len(),
                    context: format!("pool sample {i}"),
                });
            }
            by_group[s.group()].push(i);
        }
        Ok(GroupedPool {
            id: id.into(),
            samples,
            by_group,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn group_sizes(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|g| self.by_group[g].len())
    }
}

/// Compose a task by resampling the pool: train per `counts`, test
/// group-balanced with `n_te/4` per group.
///
/// With `replace = false`, draws are without replacement and the train
/// and test sets are disjoint; each pool group must then hold at least
/// its train + test demand. With `replace = true`, train samples are
/// drawn with replacement and the test split is drawn from the samples
/// left over where possible, falling back to the whole group.
pub fn build_task_from_pool(
    pool: &GroupedPool,
    counts: &GroupCounts,
    n_te: usize,
    seed: u64,
    replace: bool,
) -> Result<TaskDataset> {
    if n_te < 4 || n_te % 4 != 0 {
        return Err(Error::DegenerateInput(format!(
            "balanced test split needs n_te >= 4 and divisible by 4, got {n_te}"
        )));
    }
    let per_group_te = n_te / 4;
    let mut rng = rng_from_seed(seed);
    let mut train_idx: Vec<usize> = Vec::with_capacity(counts.total());
    let mut test_idx: Vec<usize> = Vec::with_capacity(n_te);

    for g in 0..4 {
        let available = &pool.by_group[g];
        let need_train = counts.g[g];
        let need_test = per_group_te;
        if !replace && available.len() < need_train + need_test {
            return Err(Error::PoolCapacity {
                group: g + 1,
                available: available.len(),
                needed: need_train + need_test,
            });
        }
        if replace {
            if available.is_empty() && (need_train > 0 || need_test > 0) {
                return Err(Error::PoolCapacity {
                    group: g + 1,
                    available: 0,
                    needed: need_train + need_test,
                });
            }
            for _ in 0..need_train {
                train_idx.push(available[rng.gen_range(0..available.len())]);
            }
            for _ in 0..need_test {
                test_idx.push(available[rng.gen_range(0..available.len())]);
            }
        } else {
            // One partial shuffle covers both splits, keeping them disjoint.
            let mut shuffled = available.clone();
            partial_shuffle(&mut shuffled, need_train + need_test, &mut rng);
            train_idx.extend_from_slice(&shuffled[..need_train]);
            test_idx.extend_from_slice(&shuffled[need_train..need_train + need_test]);
        }
    }

    let degrees = quantify_shifts(counts)?;
    Ok(TaskDataset {
        train: train_idx.iter().map(|&i| pool.samples[i].clone()).collect(),
        test: test_idx.iter().map(|&i| pool.samples[i].clone()).collect(),
        provenance: Provenance::Pool {
            pool_id: pool.id.clone(),
            degrees,
            n_te,
            seed,
            replace,
        },
    })
}

/// Fisher–Yates over the first `k` positions only.
fn partial_shuffle(items: &mut [usize], k: usize, rng: &mut Rng) {
    let k = k.min(items.len());
    for i in 0..k {
        let j = rng.gen_range(i..items.len());
        items.swap(i, j);
    }
}
