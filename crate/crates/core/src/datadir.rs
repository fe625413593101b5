//! On-disk layout of a featurized train/test pair:
//!
//! ```text
//! train.design  test.design     sparse text format
//! train_labels.csv test_labels.csv   row,id,rating,group
//! groups.txt                    group names in id order, one per line
//! vocab.tsv                     optional; feature_id token doc_freq
//! ```

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::dsl::GroupedDataset;
use crate::error::{data, Error, Result};
use crate::sparse::SparseBinaryDesign;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub row: usize,
    pub id: String,
    pub rating: f64,
    pub group: String,
}

#[derive(Debug, Clone)]
pub struct DataDir {
    pub train: GroupedDataset,
    pub test: GroupedDataset,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub vocab: Option<Vocabulary>,
}

impl DataDir {
    /// Token for a feature id, or the id itself when no vocabulary is present.
    pub fn token(&self, feature: usize) -> String {
        match &self.vocab {
            Some(v) if feature < v.len() => v.token(feature).to_string(),
            _ => feature.to_string(),
        }
    }
}

fn write_half(dir: &Path, stem: &str, ds: &GroupedDataset, ids: &[String]) -> Result<()> {
    if ids.len() != ds.n_rows() {
        return Err(data(format!(
            "{stem}: {} ids for {} rows",
            ids.len(),
            ds.n_rows()
        )));
    }
    let design = dir.join(format!("{stem}.design"));
    let f = fs::File::create(&design).map_err(|e| Error::io(&design, e))?;
    ds.x()
        .write_text(BufWriter::new(f))
        .map_err(|e| Error::io(&design, e))?;

    let labels = dir.join(format!("{stem}_labels.csv"));
    let mut w = csv::Writer::from_path(&labels).map_err(|e| csv_err(&labels, e))?;
    for (i, id) in ids.iter().enumerate() {
        w.serialize(LabelRow {
            row: i,
            id: id.clone(),
            rating: ds.y()[i],
            group: ds.group_names()[ds.groups()[i] - 1].clone(),
        })
        .map_err(|e| csv_err(&labels, e))?;
    }
    w.flush().map_err(|e| Error::io(&labels, e))?;
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    data(format!("{}: {e}", path.display()))
}

pub fn write(
    dir: &Path,
    train: (&GroupedDataset, &[String]),
    test: (&GroupedDataset, &[String]),
    vocab: Option<&Vocabulary>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if train.0.group_names() != test.0.group_names() {
        return Err(data("train and test halves have different groups"));
    }
    write_half(dir, "train", train.0, train.1)?;
    write_half(dir, "test", test.0, test.1)?;
    let groups = dir.join("groups.txt");
    let mut text = train.0.group_names().join("\n");
    text.push('\n');
    fs::write(&groups, text).map_err(|e| Error::io(&groups, e))?;
    if let Some(v) = vocab {
        let path = dir.join("vocab.tsv");
        fs::write(&path, v.to_tsv()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn read_half(dir: &Path, stem: &str, names: &[String]) -> Result<(GroupedDataset, Vec<String>)> {
    let design = dir.join(format!("{stem}.design"));
    let f = fs::File::open(&design).map_err(|e| Error::io(&design, e))?;
    let x = SparseBinaryDesign::read_text(BufReader::new(f))
        .map_err(|e| data(format!("{}: {e}", design.display())))?;

    let labels = dir.join(format!("{stem}_labels.csv"));
    let mut r = csv::Reader::from_path(&labels).map_err(|e| csv_err(&labels, e))?;
    let mut ids = Vec::new();
    let mut y = Vec::new();
    let mut groups = Vec::new();
    for (k, rec) in r.deserialize::<LabelRow>().enumerate() {
        let rec = rec.map_err(|e| csv_err(&labels, e))?;
        if rec.row != k {
            return Err(data(format!(
                "{}: row {k} labelled {}",
                labels.display(),
                rec.row
            )));
        }
        let g = names.iter().position(|n| *n == rec.group).ok_or_else(|| {
            data(format!(
                "{}: unknown group {:?}",
                labels.display(),
                rec.group
            ))
        })?;
        ids.push(rec.id);
        y.push(rec.rating);
        groups.push(g + 1);
    }
    let ds = GroupedDataset::new(x, y, groups, names.to_vec())?;
    Ok((ds, ids))
}

pub fn read(dir: &Path) -> Result<DataDir> {
    let groups = dir.join("groups.txt");
    let names: Vec<String> = fs::read_to_string(&groups)
        .map_err(|e| Error::io(&groups, e))?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let (train, train_ids) = read_half(dir, "train", &names)?;
    let (test, test_ids) = read_half(dir, "test", &names)?;
    if train.n_features() != test.n_features() {
        return Err(data("train and test designs have different widths"));
    }
    let vocab_path = dir.join("vocab.tsv");
    let vocab = if vocab_path.exists() {
        let text = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
        Some(Vocabulary::from_tsv(&text, 1)?)
    } else {
        None
    };
    Ok(DataDir {
        train,
        test,
        train_ids,
        test_ids,
        vocab,
    })
}
