//! Probability tables shared by the trainer, the ensembler and the scorer.
//!
//! Image-level CSV: `sequence_id,image_id,<cat_0>,...`.
//! Sequence-level CSV: `sequence_id,<cat_0>,...`.
//! Values are written with the shortest representation that reads back to
//! the same `f64`.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub sequence_id: String,
    /// `None` for sequence-level rows.
    pub image_id: Option<String>,
}

impl RowKey {
    pub fn image(sequence_id: impl Into<String>, image_id: impl Into<String>) -> Self {
        Self {
            sequence_id: sequence_id.into(),
            image_id: Some(image_id.into()),
        }
    }

    pub fn sequence(sequence_id: impl Into<String>) -> Self {
        Self {
            sequence_id: sequence_id.into(),
            image_id: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Image,
    Sequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    categories: Vec<String>,
    level: Level,
    keys: Vec<RowKey>,
    values: Vec<Vec<f64>>,
    index: HashMap<RowKey, usize>,
}

impl PredictionTable {
    pub fn new(categories: Vec<String>, level: Level) -> Self {
        Self {
            categories,
            level,
            keys: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn from_rows(categories: Vec<String>, level: Level, rows: impl IntoIterator<Item = (RowKey, Vec<f64>)>) -> Result<Self> {
        let mut table = Self::new(categories, level);
        for (k, v) in rows {
            table.push(k, v)?;
        }
        Ok(table)
    }

    /// Appends a row; probabilities must lie in `[0, 1]` and keys be unique.
    pub fn push(&mut self, key: RowKey, values: Vec<f64>) -> Result<()> {
        if values.len() != self.categories.len() {
            return Err(Error::LengthMismatch {
                expected: self.categories.len(),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!(
                "probability {bad} for {:?} outside [0, 1]",
                key.sequence_id
            )));
        }
        if (key.image_id.is_some()) != (self.level == Level::Image) {
            return Err(Error::KeyMismatch(format!(
                "row key {key:?} does not match a {:?}-level table",
                self.level
            )));
        }
        if self.index.contains_key(&key) {
            return Err(Error::KeyMismatch(format!("duplicate row {key:?}")));
        }
        self.index.insert(key.clone(), self.keys.len());
        self.keys.push(key);
        self.values.push(values);
        Ok(())
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[RowKey] {
        &self.keys
    }

    pub fn rows(&self) -> impl Iterator<Item = (&RowKey, &[f64])> {
        self.keys.iter().zip(self.values.iter().map(Vec::as_slice))
    }

    pub fn get(&self, key: &RowKey) -> Option<&[f64]> {
        self.index.get(key).map(|&i| self.values[i].as_slice())
    }

    pub fn row(&self, i: usize) -> (&RowKey, &[f64]) {
        (&self.keys[i], &self.values[i])
    }

    /// Column index of `name`.
    pub fn category_index(&self, name: &str) -> Result<usize> {
        self.categories
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Vocabulary(format!("no category named {name:?}")))
    }

    /// Same categories and the same key set (order may differ).
    pub fn check_compatible(&self, other: &PredictionTable) -> Result<()> {
        if self.categories != other.categories {
            return Err(Error::VocabularyMismatch);
        }
        if self.level != other.level || self.len() != other.len() {
            return Err(Error::KeyMismatch(format!(
                "{} rows vs {} rows",
                self.len(),
                other.len()
            )));
        }
        if let Some(missing) = self.keys.iter().find(|k| !other.index.contains_key(*k)) {
            return Err(Error::KeyMismatch(format!("{missing:?} missing from second table")));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        let mut header = vec!["sequence_id".to_owned()];
        if self.level == Level::Image {
            header.push("image_id".to_owned());
        }
        header.extend(self.categories.iter().cloned());
        w.write_record(&header)?;
        for (key, values) in self.rows() {
            let mut row = vec![key.sequence_id.clone()];
            if let Some(image) = &key.image_id {
                row.push(image.clone());
            }
            row.extend(values.iter().map(|v| format!("{v:?}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<prediction writer>", e))?;
        Ok(())
    }

    /// Reads either level; the presence of an `image_id` second column decides.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("sequence_id") {
            return Err(Error::MalformedRow {
                row: 0,
                reason: "first column must be sequence_id".into(),
            });
        }
        let level = if header.get(1) == Some("image_id") {
            Level::Image
        } else {
            Level::Sequence
        };
        let skip = if level == Level::Image { 2 } else { 1 };
        let categories: Vec<String> = header.iter().skip(skip).map(str::to_owned).collect();
        if categories.is_empty() {
            return Err(Error::MalformedRow {
                row: 0,
                reason: "no category columns".into(),
            });
        }
        let unique: HashSet<&String> = categories.iter().collect();
        if unique.len() != categories.len() {
            return Err(Error::Vocabulary("duplicate category column".into()));
        }
        let mut table = Self::new(categories, level);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            if rec.len() != header.len() {
                return Err(Error::InconsistentWidth {
                    row,
                    expected: header.len(),
                    found: rec.len(),
                });
            }
            let key = match level {
                Level::Image => RowKey::image(&rec[0], &rec[1]),
                Level::Sequence => RowKey::sequence(&rec[0]),
            };
            let values = rec
                .iter()
                .skip(skip)
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
                        row,
                        reason: format!("{c:?} is not a number"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(key, values).map_err(|e| match e {
                Error::Config(reason) => Error::MalformedRow { row, reason },
                other => other,
            })?;
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}
