//! Leaderboard submission archives.
//!
//! An archive is a zip container holding one `<zone>.npy` entry per zone.
//! Each entry is a 1-D `uint8` array of training labels in original point
//! order. Entries are written uncompressed with a fixed timestamp, so the
//! same labels always produce the same bytes. Deflated entries are accepted
//! on read.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Cursor, Read, Write};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipArchive, ZipWriter};

use crate::classes::{IGNORE_LABEL, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::npy::{self, Dtype};

/// Labels of one zone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneLabels {
    pub zone: String,
    pub labels: Vec<u8>,
}

impl ZoneLabels {
    pub fn new(zone: impl Into<String>, labels: Vec<u8>) -> Self {
        Self {
            zone: zone.into(),
            labels,
        }
    }
}

fn check_zone_name(zone: &str) -> Result<()> {
    let ok = !zone.is_empty()
        && zone
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "zone name '{zone}' must be non-empty ASCII letters, digits, '_' or '-'"
        )))
    }
}

fn first_out_of_range(labels: &[u8], num_classes: usize) -> Option<(usize, u8)> {
    labels
        .iter()
        .position(|&l| l as usize >= num_classes && l != IGNORE_LABEL)
        .map(|i| (i, labels[i]))
}

/// Builds an archive; labels must lie in `0..num_classes` or be 255.
pub fn write_submission(zones: &[ZoneLabels], num_classes: usize) -> Result<Vec<u8>> {
    let mut seen = BTreeSet::new();
    for z in zones {
        check_zone_name(&z.zone)?;
        if !seen.insert(z.zone.as_str()) {
            return Err(Error::invalid(format!("zone '{}' given twice", z.zone)));
        }
        if let Some((i, l)) = first_out_of_range(&z.labels, num_classes) {
            return Err(Error::invalid(format!(
                "zone '{}': label {l} at index {i} outside 0..{num_classes} and not {IGNORE_LABEL}",
                z.zone
            )));
        }
    }
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    let mut writer = ZipWriter::new(Cursor::new(Vec::new()));
    for z in zones {
        writer
            .start_file(format!("{}.npy", z.zone), options)
            .map_err(zip_err)?;
        writer.write_all(&npy::to_bytes_u8(&[z.labels.len()], &z.labels)?)?;
    }
    Ok(writer.finish().map_err(zip_err)?.into_inner())
}

fn zip_err(e: zip::result::ZipError) -> Error {
    match e {
        zip::result::ZipError::Io(io) => Error::Io(io),
        other => Error::data(format!("submission archive: {other}")),
    }
}

/// Reads every entry in archive order. Entries must be `<zone>.npy` files
/// holding 1-D `uint8` arrays.
pub fn read_submission(bytes: &[u8]) -> Result<Vec<ZoneLabels>> {
    let mut archive = ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| Error::data(format!("submission archive is not a readable zip: {e}")))?;
    let mut out = Vec::with_capacity(archive.len());
    let mut seen = BTreeSet::new();
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).map_err(zip_err)?;
        if entry.is_dir() {
            continue;
        }
        let name = entry.name().map_err(zip_err)?.to_string();
        let zone = name
            .strip_suffix(".npy")
            .filter(|z| check_zone_name(z).is_ok())
            .ok_or_else(|| Error::data(format!("archive entry '{name}' is not a '<zone>.npy' file")))?
            .to_string();
        if !seen.insert(zone.clone()) {
            return Err(Error::data(format!("archive holds zone '{zone}' twice")));
        }
        let mut payload = Vec::new();
        entry
            .read_to_end(&mut payload)
            .map_err(|e| Error::data(format!("entry '{name}': {e}")))?;
        let array = npy::from_bytes(&payload)
            .map_err(|e| Error::data(format!("entry '{name}': {e}")))?;
        if array.dtype != Dtype::U8 {
            return Err(Error::data(format!(
                "entry '{name}': dtype {} where uint8 ('|u1') is required",
                array.dtype.descr()
            )));
        }
        if array.shape.len() != 1 {
            return Err(Error::data(format!(
                "entry '{name}': shape {:?} where a 1-D array is required",
                array.shape
            )));
        }
        out.push(ZoneLabels::new(zone, array.into_u8()?));
    }
    Ok(out)
}

/// What a valid submission looks like.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionRules {
    pub zones: Vec<String>,
    pub num_classes: usize,
    /// Expected point count per zone, when known.
    pub lengths: BTreeMap<String, usize>,
}

impl SubmissionRules {
    pub fn new(zones: Vec<String>) -> Self {
        Self {
            zones,
            num_classes: NUM_CLASSES,
            lengths: BTreeMap::new(),
        }
    }
}

/// Checks the zone set, label range and lengths, reporting every problem found.
pub fn validate_submission(entries: &[ZoneLabels], rules: &SubmissionRules) -> Result<()> {
    let expected: BTreeSet<&str> = rules.zones.iter().map(String::as_str).collect();
    let present: BTreeSet<&str> = entries.iter().map(|e| e.zone.as_str()).collect();
    let mut problems = Vec::new();
    let missing: Vec<&str> = expected.difference(&present).copied().collect();
    if !missing.is_empty() {
        problems.push(format!("missing zones: {}", missing.join(", ")));
    }
    let extra: Vec<&str> = present.difference(&expected).copied().collect();
    if !extra.is_empty() {
        problems.push(format!("unexpected zones: {}", extra.join(", ")));
    }
    for e in entries {
        if let Some((i, l)) = first_out_of_range(&e.labels, rules.num_classes) {
            problems.push(format!(
                "zone '{}': label {l} at index {i} outside 0..{} and not {IGNORE_LABEL}",
                e.zone, rules.num_classes
            ));
        }
        if let Some(&n) = rules.lengths.get(&e.zone) {
            if n != e.labels.len() {
                problems.push(format!(
                    "zone '{}': {} labels where {n} points are expected",
                    e.zone,
                    e.labels.len()
                ));
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::data(format!("invalid submission: {}", problems.join("; "))))
    }
}

/// [`read_submission`] followed by [`validate_submission`].
pub fn read_validated(bytes: &[u8], rules: &SubmissionRules) -> Result<Vec<ZoneLabels>> {
    let entries = read_submission(bytes)?;
    validate_submission(&entries, rules)?;
    Ok(entries)
}
