//! Per-function dominator trees.
//!
//! Uses the iterative scheme of Cooper, Harvey and Kennedy: immediate
//! dominators are refined in reverse postorder until a fixed point, with the
//! two-finger `intersect` walk over postorder numbers.

use super::{BlockId, FuncId, Function, Icfg};

const UNDEF: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct DominatorTree {
    entry: BlockId,
    idom: Vec<Option<BlockId>>,
    reachable: Vec<bool>,
    children: Vec<Vec<BlockId>>,
    unreachable: Vec<BlockId>,
    // Preorder interval of each reachable block in the tree.
    tin: Vec<u32>,
    tout: Vec<u32>,
    // Blocks in tree preorder.
    preorder: Vec<BlockId>,
}

impl DominatorTree {
    pub fn entry(&self) -> BlockId {
        self.entry
    }

    /// Immediate dominator; `None` for the entry and for unreachable blocks.
    pub fn idom(&self, b: BlockId) -> Option<BlockId> {
        self.idom[b.index()]
    }

    pub fn is_reachable(&self, b: BlockId) -> bool {
        self.reachable[b.index()]
    }

    pub fn children(&self, b: BlockId) -> &[BlockId] {
        &self.children[b.index()]
    }

    /// Blocks with no path from the entry, in block order.
    pub fn unreachable(&self) -> &[BlockId] {
        &self.unreachable
    }

    /// Reflexive dominance: every block dominates itself.
    pub fn dominates(&self, a: BlockId, b: BlockId) -> bool {
        if !self.is_reachable(a) || !self.is_reachable(b) {
            return false;
        }
        self.tin[a.index()] <= self.tin[b.index()] && self.tout[b.index()] <= self.tout[a.index()]
    }

    /// Strict descendants of `b` in tree preorder.
    pub fn descendants(&self, b: BlockId) -> &[BlockId] {
        if !self.is_reachable(b) {
            return &[];
        }
        let start = self.tin[b.index()] as usize;
        let end = self.tout[b.index()] as usize;
        &self.preorder[start + 1..end]
    }
}

pub fn build_dominator_tree(f: &Function) -> DominatorTree {
    let n = f.blocks.len();
    let entry = f.entry;

    // Iterative DFS for postorder.
    let mut po_num = vec![UNDEF; n];
    let mut postorder: Vec<u32> = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut stack: Vec<(u32, usize)> = vec![(entry.0, 0)];
    seen[entry.index()] = true;
    while let Some(&mut (node, ref mut next)) = stack.last_mut() {
        let succs = &f.blocks[node as usize].succs;
        if *next < succs.len() {
            let s = succs[*next];
            *next += 1;
            if !seen[s.index()] {
                seen[s.index()] = true;
                stack.push((s.0, 0));
            }
        } else {
            po_num[node as usize] = postorder.len() as u32;
            postorder.push(node);
            stack.pop();
        }
    }

    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, b) in f.blocks.iter().enumerate() {
        if !seen[i] {
            continue;
        }
        for s in &b.succs {
            preds[s.index()].push(i as u32);
        }
    }

    let mut doms = vec![UNDEF; n];
    doms[entry.index()] = entry.0;
    let mut changed = true;
    while changed {
        changed = false;
        for &b in postorder.iter().rev() {
            if b == entry.0 {
                continue;
            }
            let mut new_idom = UNDEF;
            for &p in &preds[b as usize] {
                if doms[p as usize] == UNDEF {
                    continue;
                }
                new_idom = if new_idom == UNDEF {
                    p
                } else {
                    intersect(&doms, &po_num, p, new_idom)
                };
            }
            if doms[b as usize] != new_idom {
                doms[b as usize] = new_idom;
                changed = true;
            }
        }
    }

    let mut idom = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut unreachable = Vec::new();
    for i in 0..n {
        if !seen[i] {
            unreachable.push(BlockId(i as u32));
        } else if i != entry.index() {
            let d = BlockId(doms[i]);
            idom[i] = Some(d);
            children[d.index()].push(BlockId(i as u32));
        }
    }

    let mut tin = vec![0u32; n];
    let mut tout = vec![0u32; n];
    let mut preorder = Vec::with_capacity(n);
    let mut stack: Vec<(BlockId, usize)> = vec![(entry, 0)];
    tin[entry.index()] = 0;
    preorder.push(entry);
    while let Some(&mut (node, ref mut next)) = stack.last_mut() {
        let kids = &children[node.index()];
        if *next < kids.len() {
            let c = kids[*next];
            *next += 1;
            tin[c.index()] = preorder.len() as u32;
            preorder.push(c);
            stack.push((c, 0));
        } else {
            tout[node.index()] = preorder.len() as u32;
            stack.pop();
        }
    }

    DominatorTree {
        entry,
        idom,
        reachable: seen,
        children,
        unreachable,
        tin,
        tout,
        preorder,
    }
}

fn intersect(doms: &[u32], po_num: &[u32], mut a: u32, mut b: u32) -> u32 {
    while a != b {
        while po_num[a as usize] < po_num[b as usize] {
            a = doms[a as usize];
        }
        while po_num[b as usize] < po_num[a as usize] {
            b = doms[b as usize];
        }
    }
    a
}

/// Dominator trees for every function of an [`Icfg`].
#[derive(Debug, Clone)]
pub struct DominatorForest {
    trees: Vec<DominatorTree>,
}

impl DominatorForest {
    pub fn build(icfg: &Icfg) -> Self {
        DominatorForest {
            trees: icfg.functions().iter().map(build_dominator_tree).collect(),
        }
    }

    pub fn tree(&self, func: FuncId) -> &DominatorTree {
        &self.trees[func.index()]
    }
}
