//! Invariants checked over generated inputs.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relbelief::decision::{bayes_rule, exhaustive_minimum, make_loss, prior_risk, LossKind};
use relbelief::evidence::{credible_region, plausible_region, rb_estimate, rb_table, strength, Convention};
use relbelief::model::psi_prior;
use relbelief::report::{format_number, Precision};

fn simplex(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn prior_and_posterior() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..10).prop_flat_map(|n| (simplex(n..=n), simplex(n..=n)))
}

proptest! {
    #[test]
    fn rb_normalizes_and_is_nonnegative((prior, post) in prior_and_posterior()) {
        let t = rb_table(&prior, &post, None).unwrap();
        prop_assert!((t.normalization() - 1.0).abs() < 1e-9);
        prop_assert!(t.rb.iter().all(|&r| r >= 0.0));
    }

    #[test]
    fn credible_regions_contain_estimate_and_nest(
        (prior, post) in prior_and_posterior(),
        g1 in 0.0f64..=1.0,
        g2 in 0.0f64..=1.0,
    ) {
        let t = rb_table(&prior, &post, None).unwrap();
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let small = credible_region(&t, lo, Convention::SupGeq).unwrap();
        let big = credible_region(&t, hi, Convention::SupGeq).unwrap();
        prop_assert!(small.members.contains(&rb_estimate(&t).index));
        prop_assert!(small.members.iter().all(|m| big.members.contains(m)));
        prop_assert!(big.posterior_content >= hi - 1e-12);
    }

    #[test]
    fn plausible_region_gains_belief((prior, post) in prior_and_posterior()) {
        let t = rb_table(&prior, &post, None).unwrap();
        let pl = plausible_region(&t);
        prop_assert!(pl.members.iter().all(|&m| t.rb[m] > 1.0));
        prop_assert!(pl.posterior_content >= pl.prior_content);
    }

    #[test]
    fn strength_is_a_probability((prior, post) in prior_and_posterior(), pick in 0usize..10) {
        let t = rb_table(&prior, &post, None).unwrap();
        let s = strength(&t, pick % t.len()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
    }

    #[test]
    fn bayes_rule_attains_exhaustive_minimum(seed in any::<u64>(), which in 0usize..3, eta_frac in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (model, psi) = common::random_model(&mut rng);
        let prior = psi_prior(&model, &psi).unwrap();
        let (kind, eta) = match which {
            0 => (LossKind::Rb, None),
            1 => (LossKind::Map, None),
            _ => (LossKind::RbEta, Some(eta_frac * prior.iter().copied().fold(0.0, f64::max))),
        };
        let loss = make_loss(kind, &prior, eta).unwrap();
        let (rule, _) = bayes_rule(&model, &psi, &loss).unwrap();
        let risk = prior_risk(&model, &psi, &loss, &rule).unwrap();
        let ex = exhaustive_minimum(&model, &psi, &loss).unwrap();
        prop_assert!((risk.direct - ex.best_risk).abs() <= 1e-12 * (1.0 + ex.best_risk));
        prop_assert!((risk.direct - risk.closed_form).abs() <= 1e-12 * (1.0 + risk.direct));
    }

    #[test]
    fn short_numbers_keep_six_digits(v in -1e9f64..1e9) {
        let s = format_number(v, Precision::Short);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-6 * v.abs().max(1e-300));
        let full: f64 = format_number(v, Precision::Full).parse().unwrap();
        prop_assert_eq!(full, v);
    }
}
