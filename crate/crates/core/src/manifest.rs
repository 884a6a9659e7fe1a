//! Dataset manifests: one CSV row per image, plus the label vocabulary.
//!
//! Header: `season,sequence_id,image_id,feature_row,<cat_0>,...,<cat_{k-1}>`.
//! The category columns define the vocabulary; the column whose name equals the
//! configured empty name (default `empty`) is the distinguished empty class.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_EMPTY_NAME: &str = "empty";
const FIXED_COLUMNS: [&str; 4] = ["season", "sequence_id", "image_id", "feature_row"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    names: Vec<String>,
    empty_index: usize,
}

impl LabelVocabulary {
    pub fn new(names: Vec<String>, empty_index: usize) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::Vocabulary(format!(
                "need at least 2 categories, got {}",
                names.len()
            )));
        }
        if empty_index >= names.len() {
            return Err(Error::Vocabulary(format!(
                "empty index {empty_index} out of range for {} categories",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::Vocabulary("blank category name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Vocabulary(format!("duplicate category {name:?}")));
            }
        }
        Ok(Self { names, empty_index })
    }

    /// Builds a vocabulary whose empty class is the entry named `empty_name`.
    pub fn with_empty_name(names: Vec<String>, empty_name: &str) -> Result<Self> {
        let idx = names
            .iter()
            .position(|n| n == empty_name)
            .ok_or_else(|| Error::Vocabulary(format!("no category named {empty_name:?}")))?;
        Self::new(names, idx)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn empty_index(&self) -> usize {
        self.empty_index
    }

    pub fn empty_name(&self) -> &str {
        &self.names[self.empty_index]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Checks a multi-hot label vector against the record invariants.
    pub(crate) fn check_labels(&self, labels: &[u8], row: usize) -> Result<()> {
        if labels.len() != self.len() {
            return Err(Error::InconsistentWidth {
                row,
                expected: self.len(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&v| v > 1) {
            return Err(Error::MalformedRow {
                row,
                reason: format!("label value {bad} is not 0 or 1"),
            });
        }
        let positives = labels.iter().filter(|&&v| v == 1).count();
        if positives == 0 {
            return Err(Error::MalformedRow {
                row,
                reason: "no positive label".into(),
            });
        }
        if labels[self.empty_index] == 1 && positives > 1 {
            return Err(Error::EmptyConflict { row });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub season: String,
    pub sequence_id: String,
    pub image_id: String,
    /// Row index into the companion feature file.
    pub feature_row: usize,
    /// Multi-hot presence vector over the vocabulary.
    pub labels: Vec<u8>,
}

impl ImageRecord {
    pub fn is_empty_image(&self, vocab: &LabelVocabulary) -> bool {
        self.labels[vocab.empty_index()] == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    records: Vec<ImageRecord>,
    vocabulary: LabelVocabulary,
}

impl Manifest {
    /// Validates every record against the vocabulary and the uniqueness rule.
    pub fn new(vocabulary: LabelVocabulary, records: Vec<ImageRecord>) -> Result<Self> {
        let mut keys = HashSet::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            let row = i + 1;
            vocabulary.check_labels(&rec.labels, row)?;
            if !keys.insert((rec.sequence_id.as_str(), rec.image_id.as_str())) {
                return Err(Error::DuplicateImage {
                    row,
                    sequence_id: rec.sequence_id.clone(),
                    image_id: rec.image_id.clone(),
                });
            }
        }
        Ok(Self {
            records,
            vocabulary,
        })
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn vocabulary(&self) -> &LabelVocabulary {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Largest referenced feature row plus one (0 for an empty manifest).
    pub fn required_feature_rows(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.feature_row + 1)
            .max()
            .unwrap_or(0)
    }

    /// Groups records by sequence id. Records keep manifest order within a group.
    pub fn group_by_sequence(&self) -> BTreeMap<&str, Vec<&ImageRecord>> {
        let mut groups: BTreeMap<&str, Vec<&ImageRecord>> = BTreeMap::new();
        for rec in &self.records {
            groups.entry(rec.sequence_id.as_str()).or_default().push(rec);
        }
        groups
    }

    pub fn to_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
        header.extend(self.vocabulary.names().iter().map(String::as_str));
        w.write_record(&header)?;
        for rec in &self.records {
            let mut row = vec![
                rec.season.clone(),
                rec.sequence_id.clone(),
                rec.image_id.clone(),
                rec.feature_row.to_string(),
            ];
            row.extend(rec.labels.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<manifest writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(std::io::BufWriter::new(file))
    }

    pub fn from_reader<R: std::io::Read>(reader: R, empty_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < FIXED_COLUMNS.len() + 2 {
            return Err(Error::MalformedRow {
                row: 0,
                reason: format!("header has {} columns", header.len()),
            });
        }
        for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
            if &header[i] != *expected {
                return Err(Error::MalformedRow {
                    row: 0,
                    reason: format!("column {i} is {:?}, expected {expected:?}", &header[i]),
                });
            }
        }
        let names: Vec<String> = header
            .iter()
            .skip(FIXED_COLUMNS.len())
            .map(str::to_owned)
            .collect();
        let vocabulary = LabelVocabulary::with_empty_name(names, empty_name)?;

        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row_no = i + 1;
            let row = row?;
            let label_cells = row.len().saturating_sub(FIXED_COLUMNS.len());
            if row.len() < FIXED_COLUMNS.len() + 1 {
                return Err(Error::MalformedRow {
                    row: row_no,
                    reason: format!("{} columns", row.len()),
                });
            }
            if label_cells != vocabulary.len() {
                return Err(Error::InconsistentWidth {
                    row: row_no,
                    expected: vocabulary.len(),
                    found: label_cells,
                });
            }
            let feature_row = row[3].trim().parse::<usize>().map_err(|_| Error::MalformedRow {
                row: row_no,
                reason: format!("feature_row {:?} is not a row index", &row[3]),
            })?;
            let labels = row
                .iter()
                .skip(FIXED_COLUMNS.len())
                .map(|cell| match cell.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::MalformedRow {
                        row: row_no,
                        reason: format!("label {other:?} is not 0 or 1"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            records.push(ImageRecord {
                season: row[0].to_owned(),
                sequence_id: row[1].to_owned(),
                image_id: row[2].to_owned(),
                feature_row,
                labels,
            });
        }
        Self::new(vocabulary, records)
    }

    pub fn load(path: impl AsRef<Path>, empty_name: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file), empty_name)
    }
}

/// Loads and validates a manifest CSV using the default `empty` column.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    Manifest::load(path, DEFAULT_EMPTY_NAME)
}
