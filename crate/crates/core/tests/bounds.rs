mod common;

use bgn::bounds::DepthBound;
use bgn::{
    bound_chain, classification_lower_bound, mse, partition_regions, regression_lower_bound,
    ActivationParams, BannModel, Dataset, LayerParams,
};
use common::*;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model_with_first_layer(weights: Array2<f64>, biases: Array1<f64>) -> BannModel {
    let width = weights.nrows();
    BannModel::new(
        ActivationParams::sign(),
        vec![LayerParams::new(weights, biases).unwrap()],
        LayerParams::new(Array2::ones((1, width)), array![0.0]).unwrap(),
    )
    .unwrap()
}

fn labelled(rng: &mut ChaCha8Rng, m: usize, d0: usize, dl: usize) -> Dataset {
    Dataset::new(random_matrix(rng, m, d0), random_matrix(rng, m, dl) * 3.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_form_a_chain_below_the_model_error(seed in any::<u64>(), depth in 2usize..=4, dl in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut arch: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=6)).collect();
        arch.push(dl);
        let model = random_model(&mut rng, &arch);
        let data = labelled(&mut rng, 80, arch[0], dl);
        let chain = bound_chain(&model, &data).unwrap();
        let q = mse(&model, &data).unwrap();
        let slack = 1e-9 * (1.0 + q);
        for w in chain.windows(2) {
            prop_assert!(w[0].bound <= w[1].bound + slack);
            prop_assert!(w[1].regions <= w[0].regions);
        }
        prop_assert!(chain.last().unwrap().bound <= q + slack);
    }

    #[test]
    fn partitions_cover_every_row_once(seed in any::<u64>(), width in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, &[3, width, 1]);
        let data = labelled(&mut rng, 50, 3, 1);
        let p = partition_regions(&model, &data, 1).unwrap();
        let mut all: Vec<usize> = p.regions.iter().flatten().copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..50).collect::<Vec<_>>());
        prop_assert!(p.regions.iter().all(|r| !r.is_empty()));
        prop_assert!(p.len() <= 1 << width);
        let patterns = model.hidden_patterns(data.features.view(), 1).unwrap();
        for (region, rows) in p.regions.iter().enumerate() {
            for &i in rows {
                prop_assert_eq!(patterns.row(i).to_vec(), p.patterns[region].clone());
            }
        }
    }

    #[test]
    fn deeper_partitions_merge_whole_regions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, &[2, 4, 3, 1]);
        let data = labelled(&mut rng, 70, 2, 1);
        let shallow = partition_regions(&model, &data, 1).unwrap().assignment();
        let deep = partition_regions(&model, &data, 2).unwrap().assignment();
        for i in 0..70 {
            for j in 0..70 {
                if shallow[i] == shallow[j] {
                    prop_assert_eq!(deep[i], deep[j]);
                }
            }
        }
    }

    #[test]
    fn classification_bound_matches_exhaustive_labelling(seed in any::<u64>(), width in 1usize..=3, m in 5usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, &[2, width, 1]);
        let x = random_matrix(&mut rng, m, 2);
        let y = Array2::from_shape_fn((m, 1), |_| if rng.gen::<bool>() { 1.0 } else { -1.0 });
        let data = Dataset::new(x, y).unwrap();
        let p = partition_regions(&model, &data, 1).unwrap();
        prop_assume!(p.len() <= 8);
        let bound = classification_lower_bound(&p, data.labels.view()).unwrap();
        let oracle = classification_oracle(&p.assignment(), p.len(), data.labels.column(0).as_slice().unwrap());
        prop_assert_eq!(bound, oracle);
        prop_assert!((0.0..=0.5).contains(&bound));
    }
}

#[test]
fn width_one_layer_gives_at_most_two_regions() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let data = labelled(&mut rng, 100, 3, 1);
    let model = model_with_first_layer(array![[0.3, -1.0, 2.0]], array![0.1]);
    assert!(partition_regions(&model, &data, 1).unwrap().len() <= 2);
}

#[test]
fn zero_weights_with_positive_biases_give_one_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = labelled(&mut rng, 40, 2, 1);
    let model = model_with_first_layer(Array2::zeros((3, 2)), array![1.0, 0.5, 2.0]);
    let p = partition_regions(&model, &data, 1).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p.regions[0].len(), 40);
    let var = data.labels.column(0).var(0.0);
    let bound = regression_lower_bound(&p, data.labels.view()).unwrap();
    assert!((bound - var).abs() <= 1e-12 * (1.0 + var));
}

#[test]
fn two_hyperplanes_in_the_plane_give_at_most_four_regions() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, &[2, 2, 1]);
        let data = labelled(&mut rng, 200, 2, 1);
        assert!(partition_regions(&model, &data, 1).unwrap().len() <= 4);
    }
}

#[test]
fn constant_labels_per_region_give_a_zero_bound() {
    let model = model_with_first_layer(array![[1.0]], array![0.0]);
    let x = array![[-2.0], [-1.0], [1.0], [3.0]];
    let y = array![[7.0], [7.0], [-1.0], [-1.0]];
    let data = Dataset::new(x, y.clone()).unwrap();
    let p = partition_regions(&model, &data, 1).unwrap();
    assert_eq!(regression_lower_bound(&p, y.view()).unwrap(), 0.0);
    let chain = bound_chain(&model, &data).unwrap();
    assert_eq!(chain, vec![DepthBound { depth: 1, regions: 2, bound: 0.0 }]);
}

#[test]
fn classification_examples() {
    let model = model_with_first_layer(array![[0.0]], array![1.0]);
    let x = array![[0.0], [1.0], [2.0], [3.0]];
    let balanced = Dataset::new(x.clone(), array![[1.0], [-1.0], [1.0], [-1.0]]).unwrap();
    let p = partition_regions(&model, &balanced, 1).unwrap();
    assert_eq!(classification_lower_bound(&p, balanced.labels.view()).unwrap(), 0.5);

    let split = model_with_first_layer(array![[1.0]], array![-1.5]);
    let pure = Dataset::new(x, array![[-1.0], [-1.0], [1.0], [1.0]]).unwrap();
    let p = partition_regions(&split, &pure, 1).unwrap();
    assert_eq!(classification_lower_bound(&p, pure.labels.view()).unwrap(), 0.0);
}

#[test]
fn chain_rejects_mismatched_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = random_model(&mut rng, &[2, 3, 1]);
    let data = labelled(&mut rng, 10, 2, 2);
    assert!(bound_chain(&model, &data).is_err());
}
