use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::{FederationData, SiloDataset, Task};
use crate::error::{Error, Result};

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Loads every `<id>_train.csv` / `<id>_test.csv` pair in `dir`, in
/// lexicographic silo order. Files have no header; the first column is the
/// label and the rest are features.
pub fn load_csv_silos(dir: &Path, task: Task) -> Result<FederationData> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut train_ids = BTreeSet::new();
    let mut test_ids = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix("_train.csv") {
            train_ids.insert(id.to_string());
        } else if let Some(id) = name.strip_suffix("_test.csv") {
            test_ids.insert(id.to_string());
        }
    }
    if train_ids.is_empty() && test_ids.is_empty() {
        return Err(format_err(dir, 0, "no silo files found"));
    }
    if let Some(id) = train_ids.symmetric_difference(&test_ids).next() {
        let (have, missing) = if train_ids.contains(id) {
            ("train", "test")
        } else {
            ("test", "train")
        };
        return Err(format_err(
            &dir.join(format!("{id}_{have}.csv")),
            0,
            format!("missing matching {id}_{missing}.csv"),
        ));
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut dim: Option<(usize, PathBuf)> = None;
    for id in &train_ids {
        for (split, out) in [("train", &mut train), ("test", &mut test)] {
            let path = dir.join(format!("{id}_{split}.csv"));
            let silo = read_silo(&path, id, task)?;
            match &dim {
                None => dim = Some((silo.dim(), path)),
                Some((d, first)) if *d != silo.dim() => {
                    return Err(format_err(
                        &path,
                        1,
                        format!("{} features, but {} has {d}", silo.dim(), first.display()),
                    ))
                }
                _ => {}
            }
            out.push(silo);
        }
    }
    FederationData::new(train, test, task)
}

fn read_silo(path: &Path, id: &str, task: Task) -> Result<SiloDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format_err(path, 0, e.to_string()))?;
    let mut dim = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            format_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(format_err(path, line, "expected a label and at least one feature"));
        }
        match dim {
            None => dim = Some(record.len() - 1),
            Some(d) if d != record.len() - 1 => {
                return Err(format_err(
                    path,
                    line,
                    format!("ragged row: {} features, expected {d}", record.len() - 1),
                ))
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| format_err(path, line, format!("non-numeric value '{cell}' in column {}", col + 1)))?;
            if !v.is_finite() {
                return Err(format_err(path, line, format!("non-finite value '{cell}' in column {}", col + 1)));
            }
            if col == 0 {
                if let Task::Classification { num_classes } = task {
                    if v < 0.0 || v.fract() != 0.0 || v as usize >= num_classes {
                        return Err(format_err(path, line, format!("label {v} is not a class in [0, {num_classes})")));
                    }
                }
                labels.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let Some(dim) = dim else {
        return Err(format_err(path, 0, "file has no rows"));
    };
    SiloDataset::new(id, dim, features, labels).map_err(|e| format_err(path, 0, e.to_string()))
}
