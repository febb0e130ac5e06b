use std::path::PathBuf;

use silofed_core::data::{load_csv_silos, Task};
use silofed_core::Error;

const BIN: Task = Task::Classification { num_classes: 2 };

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn format_error(name: &str) -> (PathBuf, usize, String) {
    match load_csv_silos(&fixture(name), BIN) {
        Err(Error::Format { path, line, message }) => (path, line, message),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn loads_two_silo_directory() {
    let data = load_csv_silos(&fixture("two_silos"), BIN).unwrap();
    assert_eq!(data.silos(), 2);
    assert_eq!(data.dim(), 2);
    assert_eq!(data.train[0].id(), "alpha");
    assert_eq!(data.train_sizes(), vec![3, 2]);
    assert_eq!(data.test[1].len(), 1);
    assert_eq!(data.train[0].row(1), &[0.5, -1.0]);
    assert_eq!(data.train[0].label(2), 1.0);
}

#[test]
fn mismatched_dimension_is_rejected() {
    let (path, _, message) = format_error("mismatched_dim");
    assert!(path.ends_with("b_train.csv"), "{path:?}");
    assert!(message.contains("features"), "{message}");
}

#[test]
fn ragged_row_names_line() {
    let (path, line, message) = format_error("ragged");
    assert!(path.ends_with("a_train.csv"));
    assert_eq!(line, 2);
    assert!(message.contains("ragged"));
}

#[test]
fn non_numeric_cell_names_line() {
    let (path, line, message) = format_error("bad_cell");
    assert!(path.ends_with("a_train.csv"));
    assert_eq!(line, 2);
    assert!(message.contains("abc"));
}

#[test]
fn missing_pair_is_named() {
    let (path, _, message) = format_error("missing_pair");
    assert!(path.ends_with("a_train.csv"));
    assert!(message.contains("a_test.csv"));
}

#[test]
fn empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    match load_csv_silos(dir.path(), BIN) {
        Err(Error::Format { message, .. }) => assert_eq!(message, "no silo files found"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn out_of_range_label() {
    let err = load_csv_silos(&fixture("two_silos"), Task::Classification { num_classes: 1 });
    assert!(err.is_err());
}
