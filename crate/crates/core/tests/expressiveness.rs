use bgn::expressiveness::{product_certificate, product_resolution, square_certificate};
use bgn::{
    build_product_approximator, build_square_approximator, count_nonzero_parameters, BannModel,
};
use ndarray::array;
use proptest::prelude::*;

fn eval(model: &BannModel, x: &[f64]) -> f64 {
    model.forward(ndarray::ArrayView1::from(x)).unwrap()[0]
}

#[test]
fn single_step_square() {
    let model = build_square_approximator(1).unwrap();
    assert_eq!(model.architecture(), vec![1, 1, 1]);
    assert_eq!(model.hidden[0].biases[0], -(0.5f64).sqrt());
    let cert = square_certificate(&model, 1, 100_000).unwrap();
    assert_eq!(cert.bound, 0.5);
    assert!(cert.holds());
    assert!(cert.max_error > 0.4999);
    assert_eq!(eval(&model, &[0.7]), 0.0);
    assert_eq!(eval(&model, &[0.71]), 1.0);
}

#[test]
fn square_endpoints_are_exact() {
    for r in [1, 2, 3, 7, 10, 50, 333, 500] {
        let model = build_square_approximator(r).unwrap();
        assert_eq!(eval(&model, &[0.0]), 0.0, "r={r}");
        assert_eq!(eval(&model, &[1.0]), 1.0, "r={r}");
    }
}

#[test]
fn fifty_levels_stay_within_one_percent() {
    let model = build_square_approximator(50).unwrap();
    let cert = square_certificate(&model, 50, 100_000).unwrap();
    assert_eq!(cert.bound, 0.01);
    assert!(cert.holds(), "{cert:?}");
}

#[test]
fn width_grows_linearly_with_resolution() {
    for r in [1, 4, 16, 64] {
        let model = build_square_approximator(r).unwrap();
        assert_eq!(model.hidden[0].outputs(), r);
        assert_eq!(count_nonzero_parameters(&model, 0.0), 3 * r);
    }
    for delta in [0.5, 0.1, 0.01] {
        let model = build_product_approximator(1.0, delta).unwrap();
        assert_eq!(model.hidden[0].outputs(), 4 * product_resolution(delta));
    }
}

#[test]
fn product_vanishes_on_the_axes() {
    for (m, delta) in [(1.0, 0.01), (2.0, 0.05), (3.5, 0.2)] {
        let model = build_product_approximator(m, delta).unwrap();
        for i in 0..=40 {
            let t = -m + 2.0 * m * i as f64 / 40.0;
            assert_eq!(eval(&model, &[0.0, t]), 0.0);
            assert_eq!(eval(&model, &[t, 0.0]), 0.0);
        }
    }
}

#[test]
fn product_certificates() {
    for (m, delta) in [(1.0, 0.01), (2.0, 0.05)] {
        let model = build_product_approximator(m, delta).unwrap();
        let cert = product_certificate(&model, m, delta, 300).unwrap();
        assert!((cert.bound - 3.0 * m * m * delta).abs() < 1e-15);
        assert!(cert.holds(), "{cert:?}");
    }
}

#[test]
fn approximators_serialize_like_any_model() {
    for model in [build_square_approximator(7).unwrap(), build_product_approximator(1.5, 0.1).unwrap()] {
        let text = model.to_json().unwrap();
        assert_eq!(BannModel::from_json(&text).unwrap(), model);
    }
}

#[test]
fn invalid_arguments_are_rejected() {
    assert!(build_square_approximator(0).is_err());
    assert!(build_product_approximator(0.0, 0.1).is_err());
    assert!(build_product_approximator(1.0, 0.0).is_err());
    assert!(build_product_approximator(1.0, 1.0).is_err());
    let model = build_square_approximator(3).unwrap();
    assert!(square_certificate(&model, 3, 1).is_err());
    assert_eq!(model.predict(array![[0.0], [1.0]].view()).unwrap(), array![[0.0], [1.0]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn product_is_symmetric(m in 0.5f64..4.0, delta in 0.01f64..0.3, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let model = build_product_approximator(m, delta).unwrap();
        let (x, y) = (-m + 2.0 * m * a, -m + 2.0 * m * b);
        prop_assert!((eval(&model, &[x, y]) - eval(&model, &[y, x])).abs() <= 1e-12);
    }

    #[test]
    fn square_error_is_bounded_everywhere(r in 1usize..200, x in 0.0f64..=1.0) {
        let model = build_square_approximator(r).unwrap();
        prop_assert!((eval(&model, &[x]) - x * x).abs() <= 1.0 / (2.0 * r as f64) + 1e-15);
    }
}
