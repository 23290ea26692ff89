//! Property tests for the metric and composition invariants.

use proptest::prelude::*;
use spf_core::metrics::{accumulated_error, matern_correlation, step_count_above};
use spf_core::surrogate::{compose_delta, OneStepMlp, SurrogateModel};
use spf_core::Tensor;

proptest! {
    #[test]
    fn accumulated_error_non_decreasing_and_sums_increments(
        xs in proptest::collection::vec(0.0_f64..10.0, 1..60)
    ) {
        let acc = accumulated_error(&xs);
        prop_assert_eq!(acc.len(), xs.len());
        for w in acc.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        // Exactly the running sum of its increments, in order.
        let mut running = 0.0;
        for (a, x) in acc.iter().zip(xs.iter()) {
            running += *x;
            prop_assert_eq!(*a, running);
        }
    }

    #[test]
    fn matern_correlation_bounded_and_decreasing(
        l in 0.5_f64..20.0,
        r1 in 0.0_f64..50.0,
        dr in 0.001_f64..10.0
    ) {
        let a = matern_correlation(r1, l);
        let b = matern_correlation(r1 + dr, l);
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b < a);
        prop_assert_eq!(matern_correlation(0.0, l), 1.0);
    }

    #[test]
    fn step_count_monotone_in_threshold(
        series in proptest::collection::vec(0.0_f64..1.0, 0..40),
        theta in 0.0_f64..1.0,
        bump in 0.0_f64..0.5
    ) {
        let lo = step_count_above(&series, theta);
        let hi = step_count_above(&series, theta + bump);
        prop_assert!(hi <= lo);
    }

    #[test]
    fn compose_semigroup_property(a in 0_usize..4, b in 0_usize..4, seed in 0_u64..50) {
        let mut rng = spf_core::seed::rng_from(seed, 1, 0);
        let model = SurrogateModel::OneStepMlp(OneStepMlp::init(2, &[3], &mut rng));
        let w = vec![Tensor::vector(vec![0.4, -0.9]).unwrap()];
        let whole = compose_delta(&model, &w, a + b).unwrap();
        let split = compose_delta(&model, &compose_delta(&model, &w, a).unwrap(), b).unwrap();
        prop_assert_eq!(whole, split);
    }

    #[test]
    fn tensor_round_trips_through_flat_params(values in proptest::collection::vec(-10.0_f64..10.0, 1..30)) {
        let t = Tensor::vector(values.clone()).unwrap();
        prop_assert_eq!(t.values(), values.as_slice());
    }
}
