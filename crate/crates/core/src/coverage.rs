//! Execution-count profiles and the coverage frontier.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icfg::{BlockRef, FuncId, Icfg};
use crate::records;

/// Saturation threshold used when none is given.
pub const DEFAULT_MAX_EXEC_COUNT: u64 = 50;
pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Blocks executed more often than this are considered explored.
    pub max_exec_count: u64,
    pub top_k: usize,
    /// Harness entry points, never reported as indirect-call targets.
    #[serde(default)]
    pub roots: Vec<String>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            max_exec_count: DEFAULT_MAX_EXEC_COUNT,
            top_k: DEFAULT_TOP_K,
            roots: Vec::new(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Cumulative per-block execution counts keyed by `(function, block)` names.
/// Absent keys count zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProfileSnapshot {
    pub tag: String,
    counts: BTreeMap<(String, String), u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRecord {
    #[serde(rename = "fn")]
    function: String,
    block: String,
    count: serde_json::Number,
}

impl ProfileSnapshot {
    pub fn new(tag: impl Into<String>) -> Self {
        ProfileSnapshot {
            tag: tag.into(),
            counts: BTreeMap::new(),
        }
    }

    pub fn get(&self, function: &str, block: &str) -> u64 {
        self.counts
            .get(&(function.to_string(), block.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Adds `count` executions, reporting overflow rather than wrapping.
    pub fn add(&mut self, function: &str, block: &str, count: u64) -> Result<()> {
        let slot = self
            .counts
            .entry((function.to_string(), block.to_string()))
            .or_insert(0);
        *slot = slot.checked_add(count).ok_or_else(|| Error::CountOverflow {
            function: function.into(),
            block: block.into(),
        })?;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.counts
            .iter()
            .map(|((f, b), c)| (f.as_str(), b.as_str(), *c))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Writes the snapshot in profile format, one record per line.
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        records::write_records(
            out,
            self.iter().map(|(f, b, c)| ProfileRecord {
                function: f.into(),
                block: b.into(),
                count: c.into(),
            }),
        )
    }

    /// Checks every key against `icfg` and lays counts out densely.
    pub fn resolve(&self, icfg: &Icfg) -> Result<BlockCounts> {
        let mut counts = BlockCounts::zeroed(icfg);
        for ((f, b), c) in &self.counts {
            let at = icfg.block_ref(f, b).ok_or_else(|| Error::UnknownBlock {
                function: f.clone(),
                block: b.clone(),
            })?;
            counts.set(at, *c);
        }
        Ok(counts)
    }
}

/// Reads a profile stream; repeated `(fn, block)` records are summed.
pub fn load_profile<R: BufRead>(source: R, tag: &str) -> Result<ProfileSnapshot> {
    let mut snap = ProfileSnapshot::new(tag);
    records::for_each_record(source, |line, rec: ProfileRecord| {
        let count = match rec.count.as_u64() {
            Some(c) => c,
            None if rec.count.as_i64().is_some_and(|c| c < 0) => {
                return Err(Error::NegativeCount { line })
            }
            None if rec.count.as_f64().is_some_and(|c| c < 0.0) => {
                return Err(Error::NegativeCount { line })
            }
            None => {
                return Err(Error::Malformed {
                    line,
                    message: format!("count {} is not a 64-bit integer", rec.count),
                })
            }
        };
        snap.add(&rec.function, &rec.block, count)
            .map_err(|_| Error::Malformed {
                line,
                message: "count overflow".into(),
            })
    })?;
    Ok(snap)
}

/// Pointwise sum. The merged tag is the first non-empty tag.
pub fn merge_profiles(a: &ProfileSnapshot, b: &ProfileSnapshot) -> Result<ProfileSnapshot> {
    let mut out = a.clone();
    if out.tag.is_empty() {
        out.tag = b.tag.clone();
    }
    for (f, blk, c) in b.iter() {
        out.add(f, blk, c)?;
    }
    Ok(out)
}

/// Execution count at the entry block of `function`.
pub fn entry_count(s: &ProfileSnapshot, icfg: &Icfg, function: &str) -> Result<u64> {
    let fid = icfg
        .func_id(function)
        .ok_or_else(|| Error::UnknownFunction(function.into()))?;
    let f = icfg.function(fid);
    Ok(s.get(&f.name, &f.block(f.entry).name))
}

/// Dense per-block counts for one [`Icfg`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCounts {
    counts: Vec<Vec<u64>>,
}

impl BlockCounts {
    pub fn zeroed(icfg: &Icfg) -> Self {
        BlockCounts {
            counts: icfg
                .functions()
                .iter()
                .map(|f| vec![0; f.blocks.len()])
                .collect(),
        }
    }

    pub fn get(&self, at: BlockRef) -> u64 {
        self.counts[at.func.index()][at.block.index()]
    }

    pub fn set(&mut self, at: BlockRef, count: u64) {
        self.counts[at.func.index()][at.block.index()] = count;
    }

    /// Raises a block to at least `floor`; never lowers a count.
    pub fn raise(&mut self, at: BlockRef, floor: u64) {
        let slot = &mut self.counts[at.func.index()][at.block.index()];
        *slot = (*slot).max(floor);
    }

    /// Saturating increment.
    pub fn add(&mut self, at: BlockRef, n: u64) {
        let slot = &mut self.counts[at.func.index()][at.block.index()];
        *slot = slot.saturating_add(n);
    }

    /// Pointwise saturating sum with `other`, which must share the layout.
    pub fn accumulate(&mut self, other: &BlockCounts) {
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a = a.saturating_add(*b);
            }
        }
    }

    /// Blocks with a non-zero count, in index order.
    pub fn nonzero(&self) -> impl Iterator<Item = BlockRef> + '_ {
        self.counts.iter().enumerate().flat_map(|(f, blocks)| {
            blocks
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > 0)
                .map(move |(b, _)| BlockRef::new(FuncId(f as u32), crate::icfg::BlockId(b as u32)))
        })
    }

    pub fn entry_count(&self, icfg: &Icfg, func: FuncId) -> u64 {
        self.get(icfg.entry(func))
    }

    pub fn to_snapshot(&self, icfg: &Icfg, tag: &str) -> ProfileSnapshot {
        let mut snap = ProfileSnapshot::new(tag);
        for fid in icfg.func_ids() {
            let f = icfg.function(fid);
            for bid in f.block_ids() {
                let c = self.get(BlockRef::new(fid, bid));
                if c > 0 {
                    snap.counts
                        .insert((f.name.clone(), f.block(bid).name.clone()), c);
                }
            }
        }
        snap
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontierEdge {
    pub function: String,
    pub from: String,
    pub to: String,
    pub from_count: u64,
}

/// Intraprocedural edges `u→v` with `count(u) > θ` and `count(v) ≤ θ`.
pub(crate) fn frontier_refs(
    icfg: &Icfg,
    counts: &BlockCounts,
    threshold: u64,
) -> Vec<(BlockRef, BlockRef)> {
    let mut out = Vec::new();
    for fid in icfg.func_ids() {
        let f = icfg.function(fid);
        for bid in f.block_ids() {
            let u = BlockRef::new(fid, bid);
            if counts.get(u) <= threshold {
                continue;
            }
            for &s in &f.block(bid).succs {
                let v = BlockRef::new(fid, s);
                if counts.get(v) <= threshold {
                    out.push((u, v));
                }
            }
        }
    }
    out
}

/// The coverage frontier, ordered by function name, then source block id,
/// then target block id.
pub fn coverage_frontier(
    icfg: &Icfg,
    s: &ProfileSnapshot,
    cfg: &AnalysisConfig,
) -> Result<Vec<FrontierEdge>> {
    let counts = s.resolve(icfg)?;
    let mut edges: Vec<FrontierEdge> = frontier_refs(icfg, &counts, cfg.max_exec_count)
        .into_iter()
        .map(|(u, v)| FrontierEdge {
            function: icfg.function(u.func).name.clone(),
            from: icfg.block(u).name.clone(),
            to: icfg.block(v).name.clone(),
            from_count: counts.get(u),
        })
        .collect();
    edges.sort_by(|a, b| {
        (&a.function, &a.from, &a.to).cmp(&(&b.function, &b.from, &b.to))
    });
    Ok(edges)
}

/// Blocks covered by a single input, from the per-input coverage manifest.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InputCoverage {
    pub input: String,
    pub covered: BTreeSet<(String, String)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRecord {
    input: String,
    covered: Vec<CoveredBlock>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CoveredBlock {
    #[serde(rename = "fn")]
    function: String,
    block: String,
}

impl InputCoverage {
    pub fn new(input: impl Into<String>) -> Self {
        InputCoverage {
            input: input.into(),
            covered: BTreeSet::new(),
        }
    }

    pub fn covers(&self, function: &str, block: &str) -> bool {
        self.covered
            .contains(&(function.to_string(), block.to_string()))
    }

    pub fn insert(&mut self, function: &str, block: &str) {
        self.covered.insert((function.into(), block.into()));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("manifest record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: ManifestRecord =
            serde_json::from_str(text).map_err(|e| Error::MalformedDocument(e.to_string()))?;
        Ok(Self::from_record(rec))
    }

    fn to_record(&self) -> ManifestRecord {
        ManifestRecord {
            input: self.input.clone(),
            covered: self
                .covered
                .iter()
                .map(|(f, b)| CoveredBlock {
                    function: f.clone(),
                    block: b.clone(),
                })
                .collect(),
        }
    }

    fn from_record(rec: ManifestRecord) -> Self {
        InputCoverage {
            input: rec.input,
            covered: rec
                .covered
                .into_iter()
                .map(|c| (c.function, c.block))
                .collect(),
        }
    }
}

impl Serialize for InputCoverage {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for InputCoverage {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ManifestRecord::deserialize(d).map(Self::from_record)
    }
}

/// Reads a coverage manifest, one input per line, preserving order.
pub fn load_coverage_manifest<R: BufRead>(source: R) -> Result<Vec<InputCoverage>> {
    let mut out = Vec::new();
    records::for_each_record(source, |_, rec: ManifestRecord| {
        out.push(InputCoverage::from_record(rec));
        Ok(())
    })?;
    Ok(out)
}

pub fn write_coverage_manifest<W: Write>(out: W, inputs: &[InputCoverage]) -> Result<()> {
    records::write_records(out, inputs.iter().map(InputCoverage::to_record))
}
