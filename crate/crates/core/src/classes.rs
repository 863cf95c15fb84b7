//! Class-id remapping tables.

use crate::error::{Error, Result};

pub const IGNORE_LABEL: u8 = 255;

/// Number of grouped training classes.
pub const NUM_CLASSES: usize = 11;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "Pylon",
    "Conductor cable",
    "Structural cable",
    "Insulator",
    "High vegetation",
    "Low vegetation",
    "Herbaceous vegetation",
    "Rock, gravel, soil",
    "Impervious soil (Road)",
    "Water",
    "Building",
];

const GROUPED_TABLE: &str = include_str!("../data/class_mapping.txt");

/// Total map from declared source ids to training ids (or 255).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMapping {
    table: [Option<u8>; 256],
}

impl ClassMapping {
    /// The 22-to-11 grouping shipped with the crate.
    pub fn grouped() -> Self {
        Self::parse(GROUPED_TABLE).expect("bundled class table is valid")
    }

    /// Maps `0..k` to itself and 255 to 255.
    pub fn identity(k: usize) -> Self {
        let mut table = [None; 256];
        for (i, slot) in table.iter_mut().enumerate().take(k.min(255)) {
            *slot = Some(i as u8);
        }
        table[IGNORE_LABEL as usize] = Some(IGNORE_LABEL);
        Self { table }
    }

    /// Parses a whitespace table of `original_id training_id [name...]` rows.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = [None; 256];
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split_whitespace();
            let mut id = |what: &str| -> Result<u8> {
                cols.next()
                    .and_then(|s| s.parse::<u8>().ok())
                    .ok_or_else(|| Error::data(format!("class table line {}: bad {what}", n + 1)))
            };
            let original = id("original id")?;
            let training = id("training id")?;
            if table[original as usize].replace(training).is_some() {
                return Err(Error::data(format!(
                    "class table line {}: id {original} declared twice",
                    n + 1
                )));
            }
        }
        if table[IGNORE_LABEL as usize].is_none() {
            table[IGNORE_LABEL as usize] = Some(IGNORE_LABEL);
        }
        Ok(Self { table })
    }

    pub fn get(&self, original: u8) -> Option<u8> {
        self.table[original as usize]
    }

    /// Declared `(original, training)` pairs in ascending original order.
    pub fn entries(&self) -> impl Iterator<Item = (u8, u8)> + '_ {
        self.table
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|t| (i as u8, t)))
    }

    pub fn remap(&self, labels: &[u8]) -> Result<Vec<u8>> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                self.get(l).ok_or_else(|| {
                    Error::data(format!("unknown class id {l} at index {i}"))
                })
            })
            .collect()
    }
}

/// Element-wise table lookup.
pub fn remap_labels(labels: &[u8], mapping: &ClassMapping) -> Result<Vec<u8>> {
    mapping.remap(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouped_examples() {
        let m = ClassMapping::grouped();
        assert_eq!(m.remap(&[5, 12, 14, 255]).unwrap(), vec![1, 255, 4, 255]);
        assert_eq!(m.entries().count(), 23);
    }

    #[test]
    fn unknown_id_is_named() {
        let err = ClassMapping::grouped().remap(&[0, 22]).unwrap_err();
        assert!(err.to_string().contains("22"), "{err}");
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn identity_is_idempotent_on_grouped_output() {
        let m = ClassMapping::grouped();
        let once = m.remap(&(0..22).chain([255]).collect::<Vec<_>>()).unwrap();
        let id = ClassMapping::identity(NUM_CLASSES);
        assert_eq!(id.remap(&once).unwrap(), once);
    }

    #[test]
    fn parse_rejects_duplicates_and_garbage() {
        assert!(ClassMapping::parse("1 1\n1 2\n").is_err());
        assert!(ClassMapping::parse("1 x\n").is_err());
        assert!(ClassMapping::parse("300 1\n").is_err());
    }
}
