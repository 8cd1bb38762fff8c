mod common;

use std::io::Write;

use bgn::dataset::split_indices;
use bgn::error::Error;
use bgn::{load_csv, split_dataset, LabelSpec, SplitSpec};
use proptest::prelude::*;

fn write_temp(text: &str) -> tempfile::NamedTempFile {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(text.as_bytes()).unwrap();
    file
}

#[test]
fn portfolio_shaped_file_has_six_inputs_and_six_outputs() {
    let inputs = ["bp", "roe", "sg", "rr", "mc", "sr"];
    let outputs = ["annual_return", "excess_return", "sd", "beta", "sharpe", "win_rate"];
    let mut text = inputs.iter().chain(&outputs).copied().collect::<Vec<_>>().join(",");
    text.push('\n');
    for i in 0..63 {
        let row: Vec<String> = (0..12).map(|j| format!("{}", (i * 7 + j * 3) % 11)).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let file = write_temp(&text);
    let data = load_csv(file.path(), &LabelSpec::Trailing(6)).unwrap();
    assert_eq!((data.len(), data.input_dim(), data.output_dim()), (63, 6, 6));
    assert_eq!(data.label_names.unwrap(), outputs);

    let named: LabelSpec = "annual_return,sharpe".parse().unwrap();
    let data = load_csv(file.path(), &named).unwrap();
    assert_eq!((data.input_dim(), data.output_dim()), (10, 2));
}

#[test]
fn blank_cell_error_names_line_and_column() {
    let file = write_temp("a,b,y\n1,2,3\n4,,6\n");
    match load_csv(file.path(), &LabelSpec::Trailing(1)) {
        Err(Error::Data(msg)) => {
            assert!(msg.contains("line 3"), "{msg}");
            assert!(msg.contains("'b'"), "{msg}");
        }
        other => panic!("expected a data error, got {other:?}"),
    }
}

#[test]
fn missing_file_is_a_data_error() {
    assert!(matches!(
        load_csv("/nonexistent/data.csv", &LabelSpec::Trailing(1)),
        Err(Error::Data(_))
    ));
}

#[test]
fn diabetes_dimensions_and_split_sizes() {
    let data = common::diabetes();
    assert_eq!((data.len(), data.input_dim(), data.output_dim()), (442, 10, 1));
    let split = split_dataset(&data, &SplitSpec::default()).unwrap();
    assert_eq!((split.train.len(), split.val.len(), split.test.len()), (266, 66, 110));
    let (train, val, test) = split_indices(100, &SplitSpec::default()).unwrap();
    assert_eq!((train.len(), val.len(), test.len()), (60, 15, 25));
}

#[test]
fn split_rows_follow_their_indices() {
    let data = common::diabetes();
    let split = split_dataset(&data, &SplitSpec { seed: 9, ..SplitSpec::default() }).unwrap();
    for (part, idx) in [(&split.train, &split.train_idx), (&split.val, &split.val_idx), (&split.test, &split.test_idx)] {
        for (row, &i) in idx.iter().enumerate() {
            assert_eq!(part.features.row(row), data.features.row(i));
            assert_eq!(part.labels.row(row), data.labels.row(i));
        }
    }
}

proptest! {
    #[test]
    fn splits_are_disjoint_covering_and_deterministic(m in 5usize..600, seed in any::<u64>(), test in 0.05f64..0.6, val in 0.05f64..0.6) {
        let spec = SplitSpec { test_fraction: test, val_fraction: val, seed };
        let n_test = (test * m as f64 + 1e-9).floor() as usize;
        let n_val = (val * (m - n_test) as f64 + 1e-9).floor() as usize;
        let result = split_indices(m, &spec);
        if n_test == 0 || n_val == 0 || n_test + n_val == m {
            prop_assert!(matches!(result, Err(Error::Config(_))));
            return Ok(());
        }
        let (a, b, c) = result.unwrap();
        prop_assert_eq!((a.len(), b.len(), c.len()), (m - n_test - n_val, n_val, n_test));
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..m).collect::<Vec<_>>());
        prop_assert_eq!(split_indices(m, &spec).unwrap(), (a, b, c));
    }
}
