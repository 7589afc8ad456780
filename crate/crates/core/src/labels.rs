//! Data-flow provenance labels on blocking conditionals.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compartments::{CompartmentKind, CompartmentReport};
use crate::error::{Error, Result};
use crate::records;

/// Subset of {INPUT, HARNESS}; empty means unlabeled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LabelSet {
    pub input: bool,
    pub harness: bool,
}

impl LabelSet {
    pub const INPUT: LabelSet = LabelSet {
        input: true,
        harness: false,
    };
    pub const HARNESS: LabelSet = LabelSet {
        input: false,
        harness: true,
    };

    pub fn is_empty(self) -> bool {
        !self.input && !self.harness
    }

    pub fn union(self, other: LabelSet) -> LabelSet {
        LabelSet {
            input: self.input || other.input,
            harness: self.harness || other.harness,
        }
    }

    fn names(self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.input {
            v.push("input");
        }
        if self.harness {
            v.push("harness");
        }
        v
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.input {
            f.write_str("I")?;
        }
        if self.harness {
            f.write_str("H")?;
        }
        Ok(())
    }
}

impl FromStr for LabelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" => Ok(LabelSet::default()),
            "I" => Ok(LabelSet::INPUT),
            "H" => Ok(LabelSet::HARNESS),
            "IH" => Ok(LabelSet::INPUT.union(LabelSet::HARNESS)),
            other => Err(Error::MalformedDocument(format!("bad label column {other:?}"))),
        }
    }
}

/// Conditional block → union of every label seen on it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap {
    labels: BTreeMap<(String, String), LabelSet>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRecord {
    #[serde(rename = "fn")]
    function: String,
    block: String,
    labels: Vec<String>,
}

impl LabelMap {
    pub fn get(&self, function: &str, block: &str) -> LabelSet {
        self.labels
            .get(&(function.to_string(), block.to_string()))
            .copied()
            .unwrap_or_default()
    }

    pub fn insert(&mut self, function: &str, block: &str, set: LabelSet) {
        let slot = self
            .labels
            .entry((function.to_string(), block.to_string()))
            .or_default();
        *slot = slot.union(set);
    }

    pub fn extend(&mut self, other: &LabelMap) {
        for ((f, b), set) in &other.labels {
            self.insert(f, b, *set);
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, LabelSet)> {
        self.labels
            .iter()
            .map(|((f, b), s)| (f.as_str(), b.as_str(), *s))
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        records::write_records(
            out,
            self.iter().map(|(f, b, s)| LabelRecord {
                function: f.into(),
                block: b.into(),
                labels: s.names().into_iter().map(String::from).collect(),
            }),
        )
    }
}

pub fn load_labels<R: BufRead>(source: R) -> Result<LabelMap> {
    let mut map = LabelMap::default();
    records::for_each_record(source, |line, rec: LabelRecord| {
        let mut set = LabelSet::default();
        for name in &rec.labels {
            set = set.union(match name.as_str() {
                "input" => LabelSet::INPUT,
                "harness" => LabelSet::HARNESS,
                _ => {
                    return Err(Error::UnknownLabel {
                        line,
                        label: name.clone(),
                    })
                }
            });
        }
        map.insert(&rec.function, &rec.block, set);
        Ok(())
    })?;
    Ok(map)
}

/// Sets each frontier compartment's labels from its conditional block.
/// Indirect-target compartments have no conditional and stay unlabeled.
pub fn annotate(report: &CompartmentReport, labels: &LabelMap) -> CompartmentReport {
    let mut out = report.clone();
    for c in out.entries.iter_mut().chain(out.retired.iter_mut()) {
        c.labels = match &c.kind {
            CompartmentKind::Frontier { conditional_block } => {
                labels.get(&c.function, conditional_block)
            }
            CompartmentKind::IndirectTarget => LabelSet::default(),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_accumulates() {
        let text = "{\"fn\":\"f\",\"block\":\"b3\",\"labels\":[\"input\"]}\n\
                    {\"fn\":\"f\",\"block\":\"b3\",\"labels\":[\"harness\"]}\n";
        let map = load_labels(text.as_bytes()).unwrap();
        assert_eq!(map.get("f", "b3"), LabelSet::INPUT.union(LabelSet::HARNESS));
        assert_eq!(map.get("f", "b3").to_string(), "IH");
        assert!(load_labels("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn closed_vocabulary() {
        let text = "{\"fn\":\"f\",\"block\":\"b3\",\"labels\":[]}\n\
                    {\"fn\":\"f\",\"block\":\"b3\",\"labels\":[\"network\"]}\n";
        let err = load_labels(text.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "unknown label at line 2: \"network\"");
    }

    #[test]
    fn rendering() {
        for (set, text) in [
            (LabelSet::default(), ""),
            (LabelSet::INPUT, "I"),
            (LabelSet::HARNESS, "H"),
            (LabelSet::HARNESS.union(LabelSet::INPUT), "IH"),
        ] {
            assert_eq!(set.to_string(), text);
            assert_eq!(text.parse::<LabelSet>().unwrap(), set);
        }
    }

    #[test]
    fn log_round_trip() {
        let mut map = LabelMap::default();
        map.insert("f", "a", LabelSet::INPUT);
        map.insert("g", "b", LabelSet::HARNESS.union(LabelSet::INPUT));
        let mut out = Vec::new();
        map.write(&mut out).unwrap();
        assert_eq!(load_labels(out.as_slice()).unwrap(), map);
    }
}
