use std::collections::{HashMap, HashSet};

use super::{
    callee_closure, enumerate_candidates, rank_compartments, Compartment, CompartmentReport,
    Program, Status,
};
use crate::coverage::BlockCounts;
use crate::error::{Error, Result};
use crate::icfg::{BlockId, BlockRef};

/// Blocks that unlocking the compartment at `entry` would cover: the entry,
/// its dominator subtree, and every block of its uniquely reachable callees.
pub fn unlock_region(
    program: Program<'_>,
    entry: BlockRef,
    counts: &BlockCounts,
    threshold: u64,
) -> Result<Vec<BlockRef>> {
    let tree = program.doms.tree(entry.func);
    let mut out: Vec<BlockRef> = std::iter::once(entry.block)
        .chain(tree.descendants(entry.block).iter().copied())
        .map(|b| BlockRef::new(entry.func, b))
        .collect();
    for f in callee_closure(program, entry, counts, threshold)? {
        let n = program.icfg.function(f).blocks.len() as u32;
        out.extend((0..n).map(|b| BlockRef::new(f, BlockId(b))));
    }
    Ok(out)
}

/// `base` with each retired compartment's region raised to just above the
/// threshold, applied in retirement order.
pub fn hypothetical_counts(
    program: Program<'_>,
    base: &BlockCounts,
    retired: &[Compartment],
    threshold: u64,
) -> Result<BlockCounts> {
    let mut counts = base.clone();
    let floor = threshold.saturating_add(1);
    for c in retired {
        let entry = program
            .icfg
            .block_ref(&c.function, &c.entry_block)
            .ok_or_else(|| Error::UnknownCompartment(c.id()))?;
        for at in unlock_region(program, entry, &counts, threshold)? {
            counts.raise(at, floor);
        }
    }
    Ok(counts)
}

/// Retires the given locked compartments and re-ranks the rest against the
/// hypothetical snapshot in which they are covered. Labels and corpus
/// attribution carry over for compartments that stay in the ranking.
pub fn retire(
    report: &CompartmentReport,
    ids: &[(&str, Status)],
    program: Program<'_>,
    base: &BlockCounts,
) -> Result<CompartmentReport> {
    let mut retired = report.retired.clone();
    for &(id, status) in ids {
        if retired.iter().any(|c| c.id() == id) {
            return Err(Error::AlreadyRetired(id.to_string()));
        }
        let entry = report
            .entries
            .iter()
            .find(|c| c.id() == id)
            .ok_or_else(|| Error::UnknownCompartment(id.to_string()))?;
        let mut entry = entry.clone();
        entry.status = status;
        retired.push(entry);
    }

    let cfg = &report.config;
    let counts = hypothetical_counts(program, base, &retired, cfg.max_exec_count)?;
    let gone: HashSet<String> = retired.iter().map(Compartment::id).collect();
    let candidates = enumerate_candidates(program, &counts, cfg)?
        .into_iter()
        .filter(|c| !gone.contains(&c.id()))
        .collect();
    let mut next = rank_compartments(candidates, program, &counts, cfg, &report.snapshot)?;

    let previous: HashMap<String, &Compartment> =
        report.entries.iter().map(|c| (c.id(), c)).collect();
    for c in &mut next.entries {
        if let Some(old) = previous.get(&c.id()) {
            c.labels = old.labels;
            c.input = old.input.clone();
            c.solution = old.solution.clone();
        }
    }
    next.sources = report.sources.clone();
    next.retired = retired;
    Ok(next)
}

/// Marks one compartment resolved and re-ranks the remainder.
pub fn whatif_unlock(
    report: &CompartmentReport,
    id: &str,
    program: Program<'_>,
    base: &BlockCounts,
) -> Result<CompartmentReport> {
    retire(report, &[(id, Status::Resolved)], program, base)
}
