//! Call graph derived from static call sites plus dynamically observed
//! indirect-call bindings.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{BlockId, CallSite, FuncId, Icfg, SiteId};
use crate::error::{Error, Result};
use crate::records;

/// One record of the callgraph log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DynamicCallEdge {
    pub site: String,
    pub caller: String,
    pub target: String,
    pub count: u64,
}

/// Reads a callgraph log, collapsing repeated `(site, target)` records and
/// summing their counts. Output order is by first appearance.
pub fn load_callgraph_log<R: BufRead>(source: R) -> Result<Vec<DynamicCallEdge>> {
    let mut order: Vec<DynamicCallEdge> = Vec::new();
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    records::for_each_record(source, |line, rec: DynamicCallEdge| {
        if rec.count == 0 {
            return Err(Error::Malformed {
                line,
                message: "count must be positive".into(),
            });
        }
        let key = (rec.site.clone(), rec.target.clone());
        match seen.get(&key) {
            Some(&i) => {
                let slot = &mut order[i];
                if slot.caller != rec.caller {
                    return Err(Error::Malformed {
                        line,
                        message: format!(
                            "site {} recorded with callers {} and {}",
                            rec.site, slot.caller, rec.caller
                        ),
                    });
                }
                slot.count = slot.count.checked_add(rec.count).ok_or(Error::Malformed {
                    line,
                    message: "count overflow".into(),
                })?;
            }
            None => {
                seen.insert(key, order.len());
                order.push(rec);
            }
        }
        Ok(())
    })?;
    Ok(order)
}

pub fn write_callgraph_log<W: Write>(out: W, edges: &[DynamicCallEdge]) -> Result<()> {
    records::write_records(out, edges)
}

/// Identity of one incoming call site of a function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IncomingSite {
    /// The `slot`-th call of a block.
    Direct {
        caller: FuncId,
        block: BlockId,
        slot: u32,
    },
    /// An observed binding of an indirect site to this function.
    Indirect { site: SiteId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallGraph {
    block_callees: Vec<Vec<Vec<FuncId>>>,
    incoming: Vec<BTreeSet<IncomingSite>>,
    observed: BTreeMap<(SiteId, FuncId), u64>,
}

impl CallGraph {
    /// The call graph with static direct calls only.
    pub fn new(icfg: &Icfg) -> Self {
        Self::assemble(icfg, BTreeMap::new())
    }

    /// Returns a new graph that also carries `edges`. Re-applying edges that
    /// are already present leaves the caller sets unchanged.
    pub fn augment(&self, icfg: &Icfg, edges: &[DynamicCallEdge]) -> Result<Self> {
        let mut observed = self.observed.clone();
        for e in edges {
            let site = icfg
                .site_id(&e.site)
                .ok_or_else(|| Error::UnknownSite(e.site.clone()))?;
            let caller = icfg
                .func_id(&e.caller)
                .ok_or_else(|| Error::UnknownFunction(e.caller.clone()))?;
            let target = icfg
                .func_id(&e.target)
                .ok_or_else(|| Error::UnknownFunction(e.target.clone()))?;
            let owner = icfg.site(site).func;
            if owner != caller {
                return Err(Error::SiteCallerMismatch {
                    site: e.site.clone(),
                    owner: icfg.function(owner).name.clone(),
                    caller: e.caller.clone(),
                });
            }
            let slot = observed.entry((site, target)).or_insert(0);
            // Counts saturate: only the binding matters to the analysis.
            *slot = slot.saturating_add(e.count);
        }
        Ok(Self::assemble(icfg, observed))
    }

    fn assemble(icfg: &Icfg, observed: BTreeMap<(SiteId, FuncId), u64>) -> Self {
        let nf = icfg.functions().len();
        let mut incoming = vec![BTreeSet::new(); nf];
        let mut block_callees = Vec::with_capacity(nf);
        for fid in icfg.func_ids() {
            let f = icfg.function(fid);
            let mut per_block = Vec::with_capacity(f.blocks.len());
            for bid in f.block_ids() {
                let mut callees = Vec::new();
                for (slot, call) in f.block(bid).calls.iter().enumerate() {
                    match *call {
                        CallSite::Direct(t) => {
                            incoming[t.index()].insert(IncomingSite::Direct {
                                caller: fid,
                                block: bid,
                                slot: slot as u32,
                            });
                            callees.push(t);
                        }
                        CallSite::Indirect(s) => {
                            for (&(_, t), _) in observed.range((s, FuncId(0))..=(s, FuncId(u32::MAX)))
                            {
                                incoming[t.index()].insert(IncomingSite::Indirect { site: s });
                                callees.push(t);
                            }
                        }
                    }
                }
                per_block.push(callees);
            }
            block_callees.push(per_block);
        }
        CallGraph {
            block_callees,
            incoming,
            observed,
        }
    }

    /// Functions called from one block, direct targets and observed indirect
    /// targets in call-site order.
    pub fn block_callees(&self, func: FuncId, block: BlockId) -> &[FuncId] {
        &self.block_callees[func.index()][block.index()]
    }

    /// Every callee of every block of `func`, in block order.
    pub fn function_callees(&self, func: FuncId) -> impl Iterator<Item = FuncId> + '_ {
        self.block_callees[func.index()].iter().flatten().copied()
    }

    pub fn callers(&self, func: FuncId) -> &BTreeSet<IncomingSite> {
        &self.incoming[func.index()]
    }

    /// Distinct incoming call sites: static direct sites plus observed
    /// indirect bindings.
    pub fn incoming_sites(&self, func: FuncId) -> usize {
        self.incoming[func.index()].len()
    }

    pub fn direct_incoming(&self, func: FuncId) -> usize {
        self.incoming[func.index()]
            .iter()
            .filter(|s| matches!(s, IncomingSite::Direct { .. }))
            .count()
    }

    /// Observed `(site, target)` bindings with their accumulated counts.
    pub fn observed(&self) -> &BTreeMap<(SiteId, FuncId), u64> {
        &self.observed
    }

    pub fn observed_edges(&self, icfg: &Icfg) -> Vec<DynamicCallEdge> {
        self.observed
            .iter()
            .map(|(&(s, t), &count)| {
                let site = icfg.site(s);
                DynamicCallEdge {
                    site: site.name.clone(),
                    caller: icfg.function(site.func).name.clone(),
                    target: icfg.function(t).name.clone(),
                    count,
                }
            })
            .collect()
    }

    /// Functions reachable from `roots` through any call edge.
    pub fn reachable_from(&self, roots: &[FuncId]) -> BTreeSet<FuncId> {
        let mut seen: BTreeSet<FuncId> = BTreeSet::new();
        let mut stack: Vec<FuncId> = roots.to_vec();
        while let Some(f) = stack.pop() {
            if seen.insert(f) {
                stack.extend(self.function_callees(f).filter(|c| !seen.contains(c)));
            }
        }
        seen
    }
}

pub fn augment_call_graph(icfg: &Icfg, edges: &[DynamicCallEdge]) -> Result<CallGraph> {
    CallGraph::new(icfg).augment(icfg, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndirectStats {
    pub total_call_sites: usize,
    pub indirect_call_sites: usize,
    pub discovered_targets: usize,
}

pub fn indirect_call_summary(icfg: &Icfg, edges: &[DynamicCallEdge]) -> Result<IndirectStats> {
    let cg = augment_call_graph(icfg, edges)?;
    let total_call_sites = icfg
        .functions()
        .iter()
        .flat_map(|f| f.blocks.iter())
        .map(|b| b.calls.len())
        .sum();
    Ok(IndirectStats {
        total_call_sites,
        indirect_call_sites: icfg.sites().len(),
        discovered_targets: cg.observed().len(),
    })
}
