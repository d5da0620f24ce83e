//! Estimated dataset descriptors: pseudo-attributes from per-class
//! 2-means clustering and an availability proxy from cluster
//! compactness, for tasks that arrive without attribute annotations.

use rand::Rng as _;

use super::Descriptor;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::shiftgen::{group_index, quantify_shifts, GroupCounts, Provenance, TaskDataset};

/// Lloyd-iteration cap per restart.
const KMEANS_MAX_ITERS: usize = 100;
/// Independent seeded restarts; the lowest-inertia run wins.
const KMEANS_RESTARTS: usize = 10;

/// Outcome of a 2-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Cluster index (0/1) per input point, in canonical order:
    /// centroid 0 is lexicographically smaller than centroid 1.
    pub assignment: Vec<u8>,
    pub centroids: [Vec<f64>; 2],
    pub inertia: f64,
    /// False when every restart hit the iteration cap.
    pub converged: bool,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// 2-means with order-independent initialization: candidate seeds are
/// drawn by *sorted rank*, so permuting the input points permutes the
/// assignment without changing which clusters are found.
pub fn two_means(points: &[&[f64]], rng: &mut Rng) -> Result<KMeans> {
    if points.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "2-means needs at least 2 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
                context: format!("2-means point {i}"),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(format!(
                "2-means point {i} has a non-finite coordinate"
            )));
        }
    }
    // Sorted ranks give an input-order-independent seeding domain.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .partial_cmp(points[j])
            .expect("finite coordinates compare")
    });

    let mut best: Option<KMeans> = None;
    for _ in 0..KMEANS_RESTARTS {
        let c0_idx = order[rng.gen_range(0..order.len())];
        let mut c0 = points[c0_idx].to_vec();
        // Second seed: farthest point, ties broken by sorted rank.
        let mut far = (f64::NEG_INFINITY, 0usize);
        for &i in &order {
            let d2 = squared_distance(points[i], &c0);
            if d2 > far.0 {
                far = (d2, i);
            }
        }
        let mut c1 = points[far.1].to_vec();

        let mut assignment = vec![0u8; points.len()];
        let mut converged = false;
        for _ in 0..KMEANS_MAX_ITERS {
            let mut changed = false;
            for (i, p) in points.iter().enumerate() {
                let next = u8::from(squared_distance(p, &c1) < squared_distance(p, &c0));
                if next != assignment[i] {
                    assignment[i] = next;
                    changed = true;
                }
            }
            if !changed {
                converged = true;
                break;
            }
            // Accumulate in sorted-rank order so centroids are bitwise
            // independent of the input permutation.
            for (k, c) in [(0u8, &mut c0), (1u8, &mut c1)] {
                let mut count = 0usize;
                let mut sum = vec![0.0; dim];
                for &i in &order {
                    if assignment[i] == k {
                        count += 1;
                        for (sj, pj) in sum.iter_mut().zip(points[i]) {
                            *sj += pj;
                        }
                    }
                }
                if count == 0 {
                    continue; // keep the previous centroid
                }
                for (cj, sj) in c.iter_mut().zip(&sum) {
                    *cj = sj / count as f64;
                }
            }
        }
        let inertia: f64 = order
            .iter()
            .map(|&i| {
                let c = if assignment[i] == 0 { &c0 } else { &c1 };
                squared_distance(points[i], c)
            })
            .sum();
        let candidate = KMeans {
            assignment,
            centroids: [c0, c1],
            inertia,
            converged,
        };
        let better = match &best {
            None => true,
            Some(b) => candidate.inertia < b.inertia,
        };
        if better {
            best = Some(candidate);
        }
    }
    let mut result = best.expect("at least one restart ran");
    // Canonical cluster order.
    if lex_less(&result.centroids[1], &result.centroids[0]) {
        result.centroids.swap(0, 1);
        for a in &mut result.assignment {
            *a = 1 - *a;
        }
    }
    Ok(result)
}

/// Pseudo-attributes for a labelled sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeEstimate {
    /// Estimated attribute per sample, ±1.
    pub a: Vec<i8>,
    /// False when clustering hit its iteration cap (best-effort result).
    pub converged: bool,
}

/// Cluster each class into two groups, align clusters across classes by
/// nearest-centroid matching, then flip globally so the larger
/// population carries attribute +1.
pub fn estimate_attributes(
    features: &[&[f64]],
    y: &[i8],
    rng: &mut Rng,
) -> Result<AttributeEstimate> {
    if features.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: y.len(),
            context: "attribute estimation labels".into(),
        });
    }
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] <= 0).collect();
    for (class, idx) in [("+1", &pos), ("-1", &neg)] {
        if idx.len() < 2 {
            return Err(Error::DegenerateInput(format!(
                "attribute estimation needs ≥ 2 samples of class {class}, got {}",
                idx.len()
            )));
        }
    }
    let cluster = |idx: &[usize], rng: &mut Rng| -> Result<KMeans> {
        let pts: Vec<&[f64]> = idx.iter().map(|&i| features[i]).collect();
        two_means(&pts, rng)
    };
    let kp = cluster(&pos, rng)?;
    let kn = cluster(&neg, rng)?;

    // Match clusters across classes: same-attribute clusters should have
    // nearby centroids. Pairing "straight" links p0↔n0, "crossed" links
    // p0↔n1; pick whichever has the smaller total centroid distance.
    let d = |a: &[f64], b: &[f64]| squared_distance(a, b).sqrt();
    let straight = d(&kp.centroids[0], &kn.centroids[0]) + d(&kp.centroids[1], &kn.centroids[1]);
    let crossed = d(&kp.centroids[0], &kn.centroids[1]) + d(&kp.centroids[1], &kn.centroids[0]);
    let crossed_pairing = crossed < straight;

    // Tentatively: attribute bucket 0 = {p0, matched n-cluster}.
    let mut a = vec![0i8; y.len()];
    for (slot, &i) in pos.iter().enumerate() {
        a[i] = kp.assignment[slot] as i8; // bucket 0 or 1
    }
    for (slot, &i) in neg.iter().enumerate() {
        let mut bucket = kn.assignment[slot];
        if crossed_pairing {
            bucket = 1 - bucket;
        }
        a[i] = bucket as i8;
    }
    // Global flip: the larger population gets +1 (ties keep bucket 0).
    let bucket0 = a.iter().filter(|&&b| b == 0).count();
    let plus_bucket: i8 = if bucket0 >= y.len() - bucket0 { 0 } else { 1 };
    for b in &mut a {
        *b = if *b == plus_bucket { 1 } else { -1 };
    }
    Ok(AttributeEstimate {
        a,
        converged: kp.converged && kn.converged,
    })
}

/// Availability proxy: how compact the attribute clusters are relative
/// to the class clusters,
/// `r̂ = (Σ_y mean ‖x − c_y‖) / (Σ_a mean ‖x − c_a‖)`.
pub fn estimate_availability(features: &[&[f64]], y: &[i8], a: &[i8]) -> Result<f64> {
    if features.len() != y.len() || features.len() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: y.len().min(a.len()),
            context: "availability estimation labels".into(),
        });
    }
    let spread_sum = |labels: &[i8], what: &str| -> Result<f64> {
        let mut total = 0.0;
        for side in [1i8, -1i8] {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == side).collect();
            if idx.is_empty() {
                return Err(Error::DegenerateInput(format!(
                    "availability estimation needs both {what} values present"
                )));
            }
            let dim = features[0].len();
            let mut centroid = vec![0.0; dim];
            for &i in &idx {
                for (cj, xj) in centroid.iter_mut().zip(features[i]) {
                    *cj += xj;
                }
            }
            for cj in &mut centroid {
                *cj /= idx.len() as f64;
            }
            let mean_dist = idx
                .iter()
                .map(|&i| squared_distance(features[i], &centroid).sqrt())
                .sum::<f64>()
                / idx.len() as f64;
            total += mean_dist;
        }
        Ok(total)
    };
    let numerator = spread_sum(y, "class")?;
    let denominator = spread_sum(a, "attribute")?;
    if denominator <= 0.0 {
        return Err(Error::DegenerateInput(
            "availability proxy denominator is zero (attribute clusters are points)".into(),
        ));
    }
    Ok(numerator / denominator)
}

/// Estimation provenance flags carried alongside a descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DescriptorFlags {
    /// Attributes were inferred by clustering.
    pub estimated_attributes: bool,
    /// Availability came from the proxy rather than generative metadata.
    pub estimated_r: bool,
    /// Clustering hit its iteration cap somewhere.
    pub clustering_capped: bool,
}

/// Ground-truth descriptor: degrees from the realized train histogram,
/// availability from generative metadata where present (pool tasks fall
/// back to the proxy computed from true attributes, flagged).
pub fn compute_descriptor_oracle(task: &TaskDataset) -> Result<(Descriptor, DescriptorFlags)> {
    let degrees = task.realized_degrees()?;
    let n = task.train.len();
    let mut flags = DescriptorFlags::default();
    let (r, d) = match &task.provenance {
        Provenance::Synthetic { r, d, .. } => (*r, *d),
        Provenance::Pool { .. } => {
            flags.estimated_r = true;
            let features: Vec<&[f64]> = task.train.iter().map(|s| s.x.as_slice()).collect();
            let y: Vec<i8> = task.train.iter().map(|s| s.y).collect();
            let a: Vec<i8> = task.train.iter().map(|s| s.a).collect();
            (
                estimate_availability(&features, &y, &a)?,
                task.feature_len(),
            )
        }
    };
    let desc = Descriptor {
        d_sc: degrees.d_sc,
        d_ls: degrees.d_ls,
        d_cs: degrees.d_cs,
        r,
        n,
        d,
    };
    desc.validate()?;
    Ok((desc, flags))
}

/// Estimated descriptor: pseudo-attributes drive d_sc/d_cs and the
/// availability proxy; d_ls comes from the (always known) class labels.
pub fn compute_descriptor_estimated(
    task: &TaskDataset,
    seed: u64,
) -> Result<(Descriptor, DescriptorFlags)> {
    let mut rng = rng_from_seed(seed);
    let features: Vec<&[f64]> = task.train.iter().map(|s| s.x.as_slice()).collect();
    let y: Vec<i8> = task.train.iter().map(|s| s.y).collect();
    let est = estimate_attributes(&features, &y, &mut rng)?;
    let mut counts = [0usize; 4];
    for (i, &yi) in y.iter().enumerate() {
        counts[group_index(yi, est.a[i])] += 1;
    }
    let est_degrees = quantify_shifts(&GroupCounts { g: counts })?;
    let true_degrees = task.realized_degrees()?;
    let r = estimate_availability(&features, &y, &est.a)?;
    let (n, d) = match &task.provenance {
        Provenance::Synthetic { d, .. } => (task.train.len(), *d),
        Provenance::Pool { .. } => (task.train.len(), task.feature_len()),
    };
    let desc = Descriptor {
        d_sc: est_degrees.d_sc,
        d_ls: true_degrees.d_ls,
        d_cs: est_degrees.d_cs,
        r,
        n,
        d,
    };
    desc.validate()?;
    Ok((
        desc,
        DescriptorFlags {
            estimated_attributes: true,
            estimated_r: true,
            clustering_capped: !est.converged,
        },
    ))
}
