//! Numerically stable loss primitives.

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid, stable at both tails.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss of a classification margin `m = y·score`:
/// `log(1 + exp(−m))`.
#[inline]
pub fn logistic_loss(margin: f64) -> f64 {
    softplus(-margin)
}

/// Logit-adjusted margin: `m + τ·log(prior)`.
///
/// The sample's group prior enters the exponent of the training loss,
/// `log(1 + exp(−(m + τ·log(n_g/n))))`, so minority groups (small
/// prior, negative log) must earn a larger raw margin before their loss
/// decays — at any fixed margin a minority sample's loss is strictly
/// larger than a majority sample's. With `τ = 0` the adjustment
/// vanishes exactly and the loss reduces to plain logistic loss.
#[inline]
pub fn adjusted_margin(margin: f64, group_prior: f64, tau: f64) -> f64 {
    debug_assert!(group_prior > 0.0 && group_prior <= 1.0);
    margin + tau * group_prior.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_form_in_safe_range() {
        for x in [-20.0, -3.0, -0.1, 0.0, 0.1, 3.0, 20.0] {
            let naive = (1.0 + f64::exp(x)).ln();
            assert!((softplus(x) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn softplus_survives_extremes() {
        assert_eq!(softplus(-1000.0), 0.0);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-9);
        assert!(softplus(1000.0).is_finite());
    }

    #[test]
    fn sigmoid_is_stable_and_symmetric() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn tau_zero_is_exactly_erm() {
        // Bit-exact: 0.0 * ln(prior) is +0.0, margin + 0.0 is margin.
        for margin in [-2.0, 0.0, 0.5, 7.0] {
            for prior in [0.05, 0.25, 1.0] {
                let adjusted = adjusted_margin(margin, prior, 0.0);
                assert_eq!(adjusted.to_bits(), margin.to_bits());
                assert_eq!(
                    logistic_loss(adjusted).to_bits(),
                    logistic_loss(margin).to_bits()
                );
            }
        }
    }

    #[test]
    fn equal_priors_shift_every_margin_by_the_same_constant() {
        let c = 0.25f64.ln();
        for margin in [-1.0, 0.0, 2.0] {
            assert_eq!(adjusted_margin(margin, 0.25, 1.0), margin + c);
        }
    }

    #[test]
    fn minority_loss_exceeds_majority_loss_at_fixed_margin() {
        // Priors 0.05 vs 0.45 at margin y·score = 1, τ = 1.
        let minority = logistic_loss(adjusted_margin(1.0, 0.05, 1.0));
        let majority = logistic_loss(adjusted_margin(1.0, 0.45, 1.0));
        assert!(
            minority > majority,
            "minority {minority} should exceed majority {majority}"
        );
        // And the minority needs a strictly larger margin to reach the
        // majority's loss level.
        assert!(logistic_loss(adjusted_margin(4.0, 0.05, 1.0)) < majority);
    }
}
