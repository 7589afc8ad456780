use std::collections::BTreeMap;

use super::{Compartment, CompartmentKind, Program, Status, WeightBreakdown};
use crate::coverage::{frontier_refs, AnalysisConfig, BlockCounts};
use crate::error::Result;
use crate::icfg::BlockRef;
use crate::labels::LabelSet;

/// Unweighted candidates: frontier successors, plus entries of functions with
/// no direct callers that are still under the threshold. An entry reached by
/// several frontier edges keeps its most-executed conditional.
pub fn enumerate_candidates(
    program: Program<'_>,
    counts: &BlockCounts,
    cfg: &AnalysisConfig,
) -> Result<Vec<Compartment>> {
    let icfg = program.icfg;
    let threshold = cfg.max_exec_count;

    // entry → (conditional count, conditional)
    let mut frontier: BTreeMap<BlockRef, (u64, BlockRef)> = BTreeMap::new();
    for (u, v) in frontier_refs(icfg, counts, threshold) {
        if !program.doms.tree(v.func).is_reachable(v.block) {
            continue;
        }
        let count = counts.get(u);
        frontier
            .entry(v)
            .and_modify(|slot| {
                let better = count > slot.0
                    || (count == slot.0 && icfg.block(u).name < icfg.block(slot.1).name);
                if better {
                    *slot = (count, u);
                }
            })
            .or_insert((count, u));
    }

    let mut out: Vec<Compartment> = frontier
        .iter()
        .map(|(&v, &(count, u))| Compartment {
            function: icfg.function(v.func).name.clone(),
            entry_block: icfg.block(v).name.clone(),
            kind: CompartmentKind::Frontier {
                conditional_block: icfg.block(u).name.clone(),
            },
            weight: WeightBreakdown::ZERO,
            conditional_count: count,
            conditional_loc: icfg.block(u).loc.clone(),
            entry_loc: icfg.block(v).loc.clone(),
            labels: LabelSet::default(),
            input: String::new(),
            solution: String::new(),
            status: Status::Locked,
        })
        .collect();

    for fid in icfg.func_ids() {
        let f = icfg.function(fid);
        let entry = icfg.entry(fid);
        if program.callgraph.direct_incoming(fid) > 0
            || counts.get(entry) > threshold
            || cfg.roots.iter().any(|r| r == &f.name)
            || frontier.contains_key(&entry)
        {
            continue;
        }
        out.push(Compartment {
            function: f.name.clone(),
            entry_block: f.block(f.entry).name.clone(),
            kind: CompartmentKind::IndirectTarget,
            weight: WeightBreakdown::ZERO,
            conditional_count: 0,
            conditional_loc: String::new(),
            entry_loc: f.block(f.entry).loc.clone(),
            labels: LabelSet::default(),
            input: String::new(),
            solution: String::new(),
            status: Status::Locked,
        });
    }

    out.sort_by(|a, b| {
        (&a.function, &a.entry_block).cmp(&(&b.function, &b.entry_block))
    });
    Ok(out)
}
