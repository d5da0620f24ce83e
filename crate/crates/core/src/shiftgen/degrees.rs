//! Degree arithmetic: quantify, solve, feasibility, sampling.

use rand::Rng as _;

use super::{validate_counts, GroupCounts, ShiftDegrees};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Tolerance (on the fraction scale) below which a negative real-valued
/// group fraction is treated as rounding dust rather than infeasibility.
const FEASIBILITY_SLACK: f64 = 1e-9;

/// Attempt budget for rejection sampling in [`sample_degrees`].
const SAMPLE_ATTEMPTS: usize = 100_000;

/// Read the three shift degrees off a group histogram:
/// `d_sc = (g1+g4)/n`, `d_ls = (g1+g3)/n`, `d_cs = (g1+g2)/n`.
pub fn quantify_shifts(counts: &GroupCounts) -> Result<ShiftDegrees> {
    let n = validate_counts(counts)? as f64;
    let [g1, g2, g3, g4] = counts.g.map(|c| c as f64);
    Ok(ShiftDegrees::new(
        (g1 + g4) / n,
        (g1 + g3) / n,
        (g1 + g2) / n,
    ))
}

/// Real-valued group fractions implied by a degree triple, before
/// rounding: `g1/n = (d_sc+d_ls+d_cs−1)/2`, `g2/n = d_cs − g1/n`,
/// `g3/n = d_ls − g1/n`, `g4/n = d_sc − g1/n`.
fn real_fractions(s: &ShiftDegrees) -> [f64; 4] {
    let f1 = (s.d_sc + s.d_ls + s.d_cs - 1.0) / 2.0;
    [f1, s.d_cs - f1, s.d_ls - f1, s.d_sc - f1]
}

/// A degree triple is feasible when every implied group fraction is
/// non-negative.
pub fn is_feasible(s: &ShiftDegrees) -> bool {
    s.in_unit_cube() && real_fractions(s).iter().all(|&f| f >= -FEASIBILITY_SLACK)
}

/// Solve for integer group counts realising `s` over `n` samples.
///
/// The real solution is rounded with the largest-remainder method and
/// repaired to sum exactly to `n`; each count then differs from its real
/// value by less than one sample, so the degrees read back by
/// [`quantify_shifts`] are within `2/n` per component.
pub fn solve_group_counts(n: usize, s: &ShiftDegrees) -> Result<GroupCounts> {
    if n < 4 {
        return Err(Error::DegenerateInput(format!(
            "need n >= 4 to populate four groups, got {n}"
        )));
    }
    let fractions = real_fractions(s);
    for (i, &f) in fractions.iter().enumerate() {
        if f < -FEASIBILITY_SLACK {
            return Err(Error::InfeasibleDegrees {
                group: i + 1,
                fraction: f,
                d_sc: s.d_sc,
                d_ls: s.d_ls,
                d_cs: s.d_cs,
            });
        }
    }
    let reals = fractions.map(|f| f.max(0.0) * n as f64);
    let mut counts = reals.map(|r| r.floor() as usize);
    let assigned: usize = counts.iter().sum();
    // Distribute the remaining units to the largest fractional parts,
    // ties broken by group index for determinism.
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| {
        let fi = reals[i] - reals[i].floor();
        let fj = reals[j] - reals[j].floor();
        fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
    });
    for k in 0..n.saturating_sub(assigned) {
        counts[order[k % 4]] += 1;
    }
    Ok(GroupCounts { g: counts })
}

/// How [`sample_degrees`] draws a triple.
#[derive(Debug, Clone, PartialEq)]
pub enum DegreeMode {
    /// Uniform rejection sampling over the feasibility polytope.
    Triple,
    /// One shift only: a random component takes a random grid value,
    /// the other two stay at 0.5. Always feasible.
    SingleShift { grid: Vec<f64> },
}

/// Draw one degree triple.
pub fn sample_degrees(rng: &mut Rng, mode: &DegreeMode) -> Result<ShiftDegrees> {
    match mode {
        DegreeMode::Triple => {
            for _ in 0..SAMPLE_ATTEMPTS {
                let s = ShiftDegrees::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
                if is_feasible(&s) {
                    return Ok(s);
                }
            }
            Err(Error::SamplingFailure {
                attempts: SAMPLE_ATTEMPTS,
            })
        }
        DegreeMode::SingleShift { grid } => {
            if grid.is_empty() || !grid.iter().all(|v| (0.0..=1.0).contains(v)) {
                return Err(Error::DegenerateInput(
                    "single-shift grid must be non-empty with values in [0,1]".into(),
                ));
            }
            let component = rng.gen_range(0..3);
            let value = grid[rng.gen_range(0..grid.len())];
            Ok(single_shift(component, value))
        }
    }
}

fn single_shift(component: usize, value: f64) -> ShiftDegrees {
    let mut s = ShiftDegrees::BALANCED;
    match component {
        0 => s.d_sc = value,
        1 => s.d_ls = value,
        2 => s.d_cs = value,
        _ => unreachable!("component index in 0..3"),
    }
    s
}

/// Deterministic enumeration of single-shift settings: every component
/// crossed with every grid value, duplicates removed (the all-0.5 triple
/// appears once however often 0.5 occurs in the grid).
pub fn single_shift_settings(grid: &[f64]) -> Vec<ShiftDegrees> {
    let mut out: Vec<ShiftDegrees> = Vec::with_capacity(3 * grid.len());
    for component in 0..3 {
        for &v in grid {
            let s = single_shift(component, v);
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed, rng_from_seed, stream};

    fn deg(a: f64, b: f64, c: f64) -> ShiftDegrees {
        ShiftDegrees::new(a, b, c)
    }

    #[test]
    fn quantify_matches_worked_example() {
        // Counts (2,3,2,1) over n=8 carry degrees (3/8, 1/2, 5/8).
        let s = quantify_shifts(&GroupCounts::new(2, 3, 2, 1)).unwrap();
        assert_eq!(s, deg(3.0 / 8.0, 0.5, 5.0 / 8.0));
    }

    #[test]
    fn quantify_balanced_and_spurious() {
        let s = quantify_shifts(&GroupCounts::new(25, 25, 25, 25)).unwrap();
        assert_eq!(s, ShiftDegrees::BALANCED);
        let s = quantify_shifts(&GroupCounts::new(450, 50, 50, 450)).unwrap();
        assert_eq!(s, deg(0.9, 0.5, 0.5));
    }

    #[test]
    fn quantify_rejects_empty_histogram() {
        assert!(matches!(
            quantify_shifts(&GroupCounts::new(0, 0, 0, 0)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn solve_matches_worked_example() {
        let c = solve_group_counts(8, &deg(3.0 / 8.0, 0.5, 5.0 / 8.0)).unwrap();
        assert_eq!(c.g, [2, 3, 2, 1]);
        let c = solve_group_counts(100, &ShiftDegrees::BALANCED).unwrap();
        assert_eq!(c.g, [25, 25, 25, 25]);
        let c = solve_group_counts(1000, &deg(0.9, 0.5, 0.5)).unwrap();
        assert_eq!(c.g, [450, 50, 50, 450]);
    }

    #[test]
    fn solve_rejects_infeasible_naming_group() {
        // g3/n = 0.1 − 0.25 < 0.
        match solve_group_counts(1000, &deg(0.9, 0.1, 0.5)) {
            Err(Error::InfeasibleDegrees { group, fraction, .. }) => {
                assert_eq!(group, 3);
                assert!((fraction - (-0.15)).abs() < 1e-12);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn solve_requires_n_at_least_four() {
        assert!(solve_group_counts(3, &ShiftDegrees::BALANCED).is_err());
    }

    #[test]
    fn counts_always_sum_to_n_exactly() {
        let mut rng = rng_from_seed(derive_seed(11, &[stream::DEGREES]));
        for n in [4usize, 7, 100, 101, 999] {
            for _ in 0..200 {
                let s = sample_degrees(&mut rng, &DegreeMode::Triple).unwrap();
                let c = solve_group_counts(n, &s).unwrap();
                assert_eq!(c.total(), n, "degrees {s:?}");
            }
        }
    }

    #[test]
    fn feasibility_examples() {
        assert!(is_feasible(&ShiftDegrees::BALANCED));
        assert!(!is_feasible(&deg(0.9, 0.1, 0.5)));
        assert!(is_feasible(&deg(3.0 / 8.0, 0.5, 5.0 / 8.0)));
        // Corners of the cube.
        assert!(is_feasible(&deg(1.0, 1.0, 1.0))); // everything in G1
        assert!(!is_feasible(&deg(0.0, 0.0, 0.0))); // g_i sum can't reach n
        assert!(is_feasible(&deg(0.0, 0.5, 0.5)));
        // Out-of-cube values are never feasible.
        assert!(!is_feasible(&deg(1.2, 0.5, 0.5)));
        assert!(!is_feasible(&deg(-0.1, 0.5, 0.5)));
    }

    #[test]
    fn single_shift_settings_dedup_and_cover() {
        let grid = [0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99];
        let settings = single_shift_settings(&grid);
        // 3 components x 9 values, the balanced triple collapses to one.
        assert_eq!(settings.len(), 3 * 9 - 2);
        assert!(settings.iter().all(is_feasible));
        assert!(settings.contains(&deg(0.01, 0.5, 0.5)));
        assert!(settings.contains(&deg(0.5, 0.99, 0.5)));
        assert_eq!(
            settings
                .iter()
                .filter(|s| **s == ShiftDegrees::BALANCED)
                .count(),
            1
        );
    }

    #[test]
    fn sampled_single_shift_is_forced_by_singleton_grid() {
        let mut rng = rng_from_seed(0);
        let mode = DegreeMode::SingleShift { grid: vec![0.9] };
        for _ in 0..20 {
            let s = sample_degrees(&mut rng, &mode).unwrap();
            let non_half = [s.d_sc, s.d_ls, s.d_cs]
                .iter()
                .filter(|v| **v != 0.5)
                .count();
            assert!(non_half <= 1);
            assert!(is_feasible(&s));
        }
    }

    #[test]
    fn attribute_flip_covariance() {
        let c = GroupCounts::new(40, 25, 20, 15);
        let s = quantify_shifts(&c).unwrap();
        let sf = quantify_shifts(&c.attribute_flipped()).unwrap();
        assert!((sf.d_sc - (1.0 - s.d_sc)).abs() < 1e-15);
        assert!((sf.d_cs - (1.0 - s.d_cs)).abs() < 1e-15);
        assert_eq!(sf.d_ls, s.d_ls);
    }
}
