use std::collections::HashSet;

use super::{Program, WeightBreakdown};
use crate::coverage::BlockCounts;
use crate::error::{Error, Result};
use crate::icfg::{BlockId, BlockRef, FuncId};

/// Walks the callees reachable from `start` depth-first, admitting a function
/// only the first time it is seen, when its entry count is at most the
/// threshold, and when it has exactly one incoming call site. Admitted
/// functions are expanded; rejected ones stay in `visited` and are never
/// revisited.
fn walk_callees(
    program: Program<'_>,
    start: FuncId,
    visited: &mut HashSet<FuncId>,
    counts: &BlockCounts,
    threshold: u64,
    admitted: &mut impl FnMut(FuncId),
) {
    let mut stack = vec![start];
    while let Some(f) = stack.pop() {
        if !visited.insert(f) {
            continue;
        }
        if counts.entry_count(program.icfg, f) > threshold
            || program.callgraph.incoming_sites(f) > 1
        {
            continue;
        }
        admitted(f);
        let before = stack.len();
        stack.extend(program.callgraph.function_callees(f));
        // Pop callees in call order.
        stack[before..].reverse();
    }
}

/// Instructions in `func` and in every function uniquely reachable from it,
/// skipping anything already in `visited`.
pub fn calls_weight(
    program: Program<'_>,
    func: FuncId,
    visited: &mut HashSet<FuncId>,
    counts: &BlockCounts,
    threshold: u64,
) -> u64 {
    let mut total = 0;
    walk_callees(program, func, visited, counts, threshold, &mut |f| {
        total += program.icfg.function(f).size;
    });
    total
}

/// The dominator subtree rooted at `entry`, including `entry` itself.
fn dominated(program: Program<'_>, entry: BlockRef) -> Result<impl Iterator<Item = BlockId> + '_> {
    let tree = program.doms.tree(entry.func);
    if !tree.is_reachable(entry.block) {
        return Err(Error::UnreachableBlock {
            function: program.icfg.function(entry.func).name.clone(),
            block: program.icfg.block(entry).name.clone(),
        });
    }
    Ok(std::iter::once(entry.block).chain(tree.descendants(entry.block).iter().copied()))
}

/// Functions counted by the calls weight of a compartment entered at `entry`,
/// in the order they are admitted.
pub fn callee_closure(
    program: Program<'_>,
    entry: BlockRef,
    counts: &BlockCounts,
    threshold: u64,
) -> Result<Vec<FuncId>> {
    let mut visited = HashSet::new();
    let mut out = Vec::new();
    for b in dominated(program, entry)? {
        for &callee in program.callgraph.block_callees(entry.func, b) {
            walk_callees(program, callee, &mut visited, counts, threshold, &mut |f| {
                out.push(f)
            });
        }
    }
    Ok(out)
}

/// Weight of the compartment entered at `entry`. Zero when the entry block is
/// already saturated.
pub fn block_weight(
    program: Program<'_>,
    entry: BlockRef,
    counts: &BlockCounts,
    threshold: u64,
) -> Result<WeightBreakdown> {
    let blocks = dominated(program, entry)?;
    if counts.get(entry) > threshold {
        return Ok(WeightBreakdown::ZERO);
    }
    let func = program.icfg.function(entry.func);
    let mut block_total = 0;
    let mut called: Vec<FuncId> = Vec::new();
    for b in blocks {
        block_total += func.block(b).size;
        called.extend_from_slice(program.callgraph.block_callees(entry.func, b));
    }
    let mut visited = HashSet::new();
    let calls_total = called
        .into_iter()
        .map(|f| calls_weight(program, f, &mut visited, counts, threshold))
        .sum();
    Ok(WeightBreakdown::new(block_total, calls_total))
}
