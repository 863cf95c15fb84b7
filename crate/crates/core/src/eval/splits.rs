//! Per-class point counts for dataset subsets.
//!
//! Percentages are computed from the integer counts and rounded half-up to one
//! decimal, so a table always recomputes exactly from its counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::classes::IGNORE_LABEL;
use crate::error::{Error, Result};

const DEFAULT_ASSIGNMENT: &str = include_str!("../../data/splits.txt");

/// Zone to subset assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    zones: BTreeMap<String, String>,
    subsets: Vec<String>,
}

impl SplitAssignment {
    /// The zone assignment bundled with the crate (train, val and test).
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_ASSIGNMENT).expect("bundled split table is valid")
    }

    /// Parses `zone subset` rows; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut zones = BTreeMap::new();
        let mut subsets: Vec<String> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let [zone, subset] = cols[..] else {
                return Err(Error::data(format!(
                    "split table line {}: expected 'zone subset'",
                    n + 1
                )));
            };
            if zones.insert(zone.to_string(), subset.to_string()).is_some() {
                return Err(Error::data(format!(
                    "split table line {}: zone '{zone}' assigned twice",
                    n + 1
                )));
            }
            if !subsets.iter().any(|s| s == subset) {
                subsets.push(subset.to_string());
            }
        }
        if zones.is_empty() {
            return Err(Error::data("split table has no rows"));
        }
        Ok(Self { zones, subsets })
    }

    pub fn subset_of(&self, zone: &str) -> Option<&str> {
        self.zones.get(zone).map(String::as_str)
    }

    /// Subset names in order of first appearance.
    pub fn subsets(&self) -> &[String] {
        &self.subsets
    }

    /// Zones of `subset` in lexicographic order.
    pub fn zones_in(&self, subset: &str) -> Vec<&str> {
        self.zones
            .iter()
            .filter(|(_, s)| s.as_str() == subset)
            .map(|(z, _)| z.as_str())
            .collect()
    }

    /// Relabels every zone of subset `from` as `into`.
    pub fn merged(&self, from: &str, into: &str) -> Self {
        let zones = self
            .zones
            .iter()
            .map(|(z, s)| {
                let s = if s == from { into } else { s.as_str() };
                (z.clone(), s.to_string())
            })
            .collect();
        let mut subsets: Vec<String> = Vec::new();
        for s in &self.subsets {
            let s = if s == from { into } else { s.as_str() };
            if !subsets.iter().any(|x| x == s) {
                subsets.push(s.to_string());
            }
        }
        Self { zones, subsets }
    }
}

/// `round_half_up(1000 * num / den)`, i.e. a percentage in tenths.
pub fn percent_tenths(num: u64, den: u64) -> Option<u64> {
    if den == 0 {
        return None;
    }
    let (num, den) = (num as u128, den as u128);
    Some(((2000 * num + den) / (2 * den)) as u64)
}

/// Formats tenths of a percent as `12.3`.
pub fn format_tenths(tenths: u64) -> String {
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Class counts per subset, `counts[subset][class]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitTable {
    subsets: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl SplitTable {
    pub fn from_counts(subsets: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if subsets.is_empty() || subsets.len() != counts.len() {
            return Err(Error::invalid("one count row per subset is required"));
        }
        let k = counts[0].len();
        if k == 0 || counts.iter().any(|c| c.len() != k) {
            return Err(Error::invalid("every subset needs the same number of classes"));
        }
        Ok(Self { subsets, counts })
    }

    /// Parses CSV with a `class` column followed by one column per subset.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::data(format!("count table header: {e}")))?
            .clone();
        if headers.len() < 2 || &headers[0] != "class" {
            return Err(Error::data("count table must start with a 'class' column"));
        }
        let subsets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut rows: Vec<(usize, Vec<u64>)> = Vec::new();
        for (n, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::data(format!("count table row {}: {e}", n + 1)))?;
            let parse = |s: &str, what: &str| {
                s.replace(['_', ','], "")
                    .parse::<u64>()
                    .map_err(|_| Error::data(format!("count table row {}: bad {what} '{s}'", n + 1)))
            };
            let class = parse(&rec[0], "class")? as usize;
            let values = rec
                .iter()
                .skip(1)
                .map(|v| parse(v, "count"))
                .collect::<Result<Vec<_>>>()?;
            rows.push((class, values));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(Error::data("count table classes must be 0..K without gaps or repeats"));
        }
        let counts = (0..subsets.len())
            .map(|s| rows.iter().map(|r| r.1[s]).collect())
            .collect();
        Self::from_counts(subsets, counts)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for s in &self.subsets {
            out.push(',');
            out.push_str(s);
        }
        out.push('\n');
        for c in 0..self.classes() {
            out.push_str(&c.to_string());
            for s in 0..self.subsets.len() {
                let _ = write!(out, ",{}", self.counts[s][c]);
            }
            out.push('\n');
        }
        out
    }

    pub fn classes(&self) -> usize {
        self.counts[0].len()
    }

    pub fn subsets(&self) -> &[String] {
        &self.subsets
    }

    pub fn subset_index(&self, name: &str) -> Option<usize> {
        self.subsets.iter().position(|s| s == name)
    }

    pub fn count(&self, subset: usize, class: usize) -> u64 {
        self.counts[subset][class]
    }

    pub fn class_total(&self, class: usize) -> u64 {
        self.counts.iter().map(|c| c[class]).sum()
    }

    pub fn subset_total(&self, subset: usize) -> u64 {
        self.counts[subset].iter().sum()
    }

    pub fn grand_total(&self) -> u64 {
        (0..self.subsets.len()).map(|s| self.subset_total(s)).sum()
    }

    /// Share of `class` points that fall in `subset`, or the overall share for `None`.
    pub fn share_tenths(&self, subset: usize, class: Option<usize>) -> Option<u64> {
        match class {
            Some(c) => percent_tenths(self.counts[subset][c], self.class_total(c)),
            None => percent_tenths(self.subset_total(subset), self.grand_total()),
        }
    }

    /// Fraction of the subset's points that belong to `class`.
    pub fn distribution_tenths(&self, subset: usize, class: usize) -> Option<u64> {
        percent_tenths(self.counts[subset][class], self.subset_total(subset))
    }

    /// Plain-text table: counts per subset, total, share of the last subset,
    /// and within-subset distributions.
    pub fn render(&self) -> String {
        let last = self.subsets.len() - 1;
        let fmt = |t: Option<u64>| t.map_or_else(|| "-".to_string(), format_tenths);
        let mut header = vec!["class".to_string()];
        header.extend(self.subsets.iter().cloned());
        header.push("total".into());
        header.push(format!("% {}/total", self.subsets[last]));
        header.extend(self.subsets.iter().map(|s| format!("{s} dist. (%)")));

        let mut rows = vec![header];
        for c in 0..self.classes() {
            let mut row = vec![c.to_string()];
            row.extend((0..self.subsets.len()).map(|s| self.counts[s][c].to_string()));
            row.push(self.class_total(c).to_string());
            row.push(fmt(self.share_tenths(last, Some(c))));
            row.extend((0..self.subsets.len()).map(|s| fmt(self.distribution_tenths(s, c))));
            rows.push(row);
        }
        let mut total = vec!["TOTAL".to_string()];
        total.extend((0..self.subsets.len()).map(|s| self.subset_total(s).to_string()));
        total.push(self.grand_total().to_string());
        total.push(fmt(self.share_tenths(last, None)));
        total.extend((0..self.subsets.len()).map(|s| {
            if self.subset_total(s) > 0 { "100.0".to_string() } else { "-".to_string() }
        }));
        rows.push(total);

        let widths: Vec<usize> = (0..rows[0].len())
            .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| if i == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Counts labels per class for every subset of `assignment`.
///
/// Labels equal to 255 are not counted. Subsets keep the assignment's order.
pub fn split_statistics<'a>(
    zones: impl IntoIterator<Item = (&'a str, &'a [u8])>,
    assignment: &SplitAssignment,
    k: usize,
) -> Result<SplitTable> {
    let subsets = assignment.subsets().to_vec();
    let mut counts = vec![vec![0u64; k]; subsets.len()];
    for (zone, labels) in zones {
        let subset = assignment
            .subset_of(zone)
            .ok_or_else(|| Error::data(format!("zone '{zone}' has no subset assignment")))?;
        let s = subsets.iter().position(|x| x == subset).unwrap();
        for (i, &l) in labels.iter().enumerate() {
            if l == IGNORE_LABEL {
                continue;
            }
            let slot = counts[s].get_mut(l as usize).ok_or_else(|| {
                Error::data(format!("zone '{zone}': label {l} at index {i} outside 0..{k}"))
            })?;
            *slot += 1;
        }
    }
    SplitTable::from_counts(subsets, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_assignment() {
        let a = SplitAssignment::bundled();
        assert_eq!(a.subsets(), &["train", "val", "test"]);
        assert_eq!(a.zones_in("test").len(), 9);
        assert_eq!(a.zones_in("val").len(), 6);
        assert_eq!(a.zones_in("train").len(), 21);
        assert_eq!(a.subset_of("t1z4"), Some("test"));
        let m = a.merged("val", "train");
        assert_eq!(m.subsets(), &["train", "test"]);
        assert_eq!(m.zones_in("train").len(), 27);
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(percent_tenths(759_222_245, 2_448_762_950), Some(310));
        assert_eq!(percent_tenths(99_817_139, 234_843_197), Some(425));
        assert_eq!(percent_tenths(1, 8), Some(125));
        assert_eq!(percent_tenths(1, 16), Some(63));
        assert_eq!(percent_tenths(1, 0), None);
        assert_eq!(format_tenths(310), "31.0");
        assert_eq!(format_tenths(5), "0.5");
    }

    #[test]
    fn two_zone_toy() {
        let a = SplitAssignment::parse("za train\nzb test\n").unwrap();
        let za = [0u8, 0, 1, 255, 2];
        let zb = [1u8, 1, 2, 0];
        let t = split_statistics([("za", &za[..]), ("zb", &zb[..])], &a, 3).unwrap();
        assert_eq!(t.count(0, 0), 2);
        assert_eq!(t.count(1, 1), 2);
        assert_eq!(t.grand_total(), 8);
        assert_eq!(t.share_tenths(1, None), Some(500));
        assert_eq!(t.share_tenths(1, Some(1)), Some(667));
        assert_eq!(t.distribution_tenths(0, 0), Some(500));
        let rendered = t.render();
        assert!(rendered.contains("TOTAL"), "{rendered}");
    }

    #[test]
    fn unassigned_zone_and_bad_label() {
        let a = SplitAssignment::parse("za train\n").unwrap();
        assert!(matches!(split_statistics([("zq", &[0u8][..])], &a, 3), Err(Error::Data(_))));
        assert!(matches!(split_statistics([("za", &[7u8][..])], &a, 3), Err(Error::Data(_))));
    }

    #[test]
    fn csv_round_trip() {
        let t = SplitTable::from_csv("class,train,test\n1,5,6\n0,1_000,2\n").unwrap();
        assert_eq!(t.count(0, 0), 1000);
        assert_eq!(t.count(1, 1), 6);
        assert_eq!(SplitTable::from_csv(&t.to_csv()).unwrap(), t);
        assert!(SplitTable::from_csv("class,train\n0,1\n2,3\n").is_err());
        assert!(SplitTable::from_csv("id,train\n0,1\n").is_err());
    }
}
