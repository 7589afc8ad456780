use std::collections::BTreeMap;

use super::spec::{SimCall, SimSpec};
use crate::coverage::{BlockCounts, InputCoverage};
use crate::icfg::{BlockRef, FuncId, SiteId};
use crate::labels::LabelSet;

/// What one execution of the sim target did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub hits: BlockCounts,
    /// Indirect calls taken, by `(site, target)`.
    pub indirect: BTreeMap<(SiteId, FuncId), u64>,
    /// Labels of every guarded block that was evaluated.
    pub labels: BTreeMap<BlockRef, LabelSet>,
    pub steps: u64,
    /// The step budget ran out before the walk returned from the entry.
    pub truncated: bool,
}

impl ExecutionTrace {
    pub fn hit(&self, at: BlockRef) -> u64 {
        self.hits.get(at)
    }

    pub fn coverage(&self, spec: &SimSpec, input: &str) -> InputCoverage {
        let mut cov = InputCoverage::new(input);
        for at in self.hits.nonzero() {
            let name = spec.icfg.describe(at);
            cov.insert(name.function, name.block);
        }
        cov
    }
}

struct Frame {
    at: BlockRef,
    next_call: usize,
}

/// Walks the spec from its entry function. Every block entered costs one
/// step; when `step_budget` steps are spent the walk stops and the trace is
/// marked truncated.
pub fn execute(spec: &SimSpec, input: &[u8], flags: u64, step_budget: u64) -> ExecutionTrace {
    let mut trace = ExecutionTrace {
        hits: BlockCounts::zeroed(&spec.icfg),
        indirect: BTreeMap::new(),
        labels: BTreeMap::new(),
        steps: 0,
        truncated: false,
    };
    let mut stack: Vec<Frame> = Vec::new();

    let enter = |trace: &mut ExecutionTrace, at: BlockRef| -> bool {
        if trace.steps >= step_budget {
            trace.truncated = true;
            return false;
        }
        trace.steps += 1;
        trace.hits.add(at, 1);
        true
    };

    let start = spec.icfg.entry(spec.entry);
    if !enter(&mut trace, start) {
        return trace;
    }
    stack.push(Frame {
        at: start,
        next_call: 0,
    });

    while let Some(top) = stack.last_mut() {
        let block = &spec.blocks[top.at.func.index()][top.at.block.index()];

        if let Some(call) = block.calls.get(top.next_call) {
            top.next_call += 1;
            let target = match call {
                SimCall::Direct(f) => Some(*f),
                SimCall::Indirect {
                    site,
                    byte,
                    table,
                    default,
                } => {
                    let target = input
                        .get(*byte)
                        .and_then(|b| table.get(b))
                        .copied()
                        .or(*default);
                    if let Some(t) = target {
                        *trace.indirect.entry((*site, t)).or_default() += 1;
                    }
                    target
                }
            };
            if let Some(f) = target {
                let at = spec.icfg.entry(f);
                if !enter(&mut trace, at) {
                    break;
                }
                stack.push(Frame { at, next_call: 0 });
            }
            continue;
        }

        let succs = &spec.icfg.block(top.at).succs;
        let next = match &block.guard {
            Some(g) => {
                let labels = trace.labels.entry(top.at).or_default();
                *labels = labels.union(g.labels());
                if g.eval(input, flags) {
                    succs.first()
                } else {
                    succs.get(1)
                }
            }
            None => succs.first(),
        };
        match next {
            Some(&b) => {
                let at = BlockRef::new(top.at.func, b);
                top.at = at;
                top.next_call = 0;
                if !enter(&mut trace, at) {
                    break;
                }
            }
            None => {
                stack.pop();
            }
        }
    }
    trace
}
