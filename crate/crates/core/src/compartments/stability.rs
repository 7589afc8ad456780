use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::CompartmentReport;
use crate::coverage::ProfileSnapshot;

/// Locked compartments whose entry block is still at or under the report's
/// threshold in `later`.
pub fn still_locked(report: &CompartmentReport, later: &ProfileSnapshot) -> usize {
    report
        .entries
        .iter()
        .filter(|c| later.get(&c.function, &c.entry_block) <= report.config.max_exec_count)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopkOverlap {
    pub shared: usize,
    pub k: usize,
    /// True when either report had fewer than `k` entries.
    pub truncated: bool,
}

/// Number of compartment ids shared by the first `k` entries of each report.
pub fn topk_overlap(a: &CompartmentReport, b: &CompartmentReport, k: usize) -> TopkOverlap {
    let ids_a: HashSet<String> = a.entries.iter().take(k).map(|c| c.id()).collect();
    let shared = b
        .entries
        .iter()
        .take(k)
        .filter(|c| ids_a.contains(&c.id()))
        .count();
    TopkOverlap {
        shared,
        k,
        truncated: a.entries.len() < k || b.entries.len() < k,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub still_locked: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topk_overlap: Option<TopkOverlap>,
}
