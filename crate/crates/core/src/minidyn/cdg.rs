//! Control dependence over a CFG, and its projection onto branches.
//!
//! Immediate post-dominators come from the iterative dataflow scheme on the
//! reversed graph; dependences from the standard edge walk up the
//! post-dominator tree. A node is never recorded as dependent on its own
//! outgoing edge (loop conditions would otherwise depend on themselves),
//! which keeps the graph acyclic for structured code.

use std::collections::VecDeque;

use super::cfg::{build_cfg, ControlFlowGraph};
use super::compiler::CompiledModule;

#[derive(Debug, Clone)]
pub struct ControlDependenceGraph {
    /// deps[b] = (controlling block, successor index) pairs.
    pub deps: Vec<Vec<(usize, usize)>>,
}

/// ipdom per block; `None` for blocks that cannot reach the exit.
pub fn immediate_postdominators(cfg: &ControlFlowGraph) -> Vec<Option<usize>> {
    let n = cfg.n_blocks;
    // Postorder of the reversed graph, rooted at the exit.
    let mut po_index: Vec<Option<usize>> = vec![None; n];
    let mut order: Vec<usize> = Vec::new();
    let mut visited = vec![false; n];
    let mut stack: Vec<(usize, usize)> = vec![(cfg.exit, 0)];
    visited[cfg.exit] = true;
    while let Some(&mut (node, ref mut i)) = stack.last_mut() {
        if *i < cfg.preds[node].len() {
            let next = cfg.preds[node][*i];
            *i += 1;
            if !visited[next] {
                visited[next] = true;
                stack.push((next, 0));
            }
        } else {
            stack.pop();
            po_index[node] = Some(order.len());
            order.push(node);
        }
    }

    let mut ipdom: Vec<Option<usize>> = vec![None; n];
    ipdom[cfg.exit] = Some(cfg.exit);
    let mut changed = true;
    while changed {
        changed = false;
        for &b in order.iter().rev() {
            if b == cfg.exit {
                continue;
            }
            let mut new_idom: Option<usize> = None;
            for e in &cfg.succs[b] {
                if ipdom[e.to].is_some() {
                    new_idom = Some(match new_idom {
                        None => e.to,
                        Some(cur) => intersect(cur, e.to, &ipdom, &po_index),
                    });
                }
            }
            if new_idom.is_some() && ipdom[b] != new_idom {
                ipdom[b] = new_idom;
                changed = true;
            }
        }
    }
    ipdom
}

fn intersect(
    mut a: usize,
    mut b: usize,
    ipdom: &[Option<usize>],
    po_index: &[Option<usize>],
) -> usize {
    while a != b {
        while po_index[a].unwrap() < po_index[b].unwrap() {
            a = ipdom[a].unwrap();
        }
        while po_index[b].unwrap() < po_index[a].unwrap() {
            b = ipdom[b].unwrap();
        }
    }
    a
}

pub fn control_dependence(cfg: &ControlFlowGraph) -> ControlDependenceGraph {
    let ipdom = immediate_postdominators(cfg);
    let mut deps: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cfg.n_blocks];
    for u in 0..cfg.n_blocks {
        let Some(iu) = ipdom[u] else { continue };
        for (j, e) in cfg.succs[u].iter().enumerate() {
            // ipdom(u) post-dominates every successor of u, so this walk
            // always terminates there.
            let mut t = e.to;
            while t != iu {
                if t != u {
                    deps[t].push((u, j));
                }
                t = ipdom[t].unwrap();
            }
        }
    }
    for d in &mut deps {
        d.sort_unstable();
        d.dedup();
    }
    ControlDependenceGraph { deps }
}

/// Governance between branches of one compiled module: which branches must
/// be taken before a given branch's predicate can execute at all.
#[derive(Debug, Clone)]
pub struct BranchDependence {
    pub n_branches: usize,
    /// Branches whose outcome directly enables this branch's predicate.
    pub governed_by: Vec<Vec<usize>>,
    /// Inverse of `governed_by`.
    pub governs: Vec<Vec<usize>>,
    /// Whether the predicate runs unconditionally once its function is
    /// entered (its block depends on the entry edge). A predicate inside a
    /// loop body that can also return early is both entry-governed and
    /// branch-governed; entry wins for rootness.
    pub entry_governed: Vec<bool>,
    /// Length of the shortest governing chain, counting the branch itself.
    pub depth: Vec<usize>,
    /// Branches whose predicate needs no other branch taken first.
    pub roots: Vec<usize>,
}

pub fn branch_dependence(module: &CompiledModule) -> BranchDependence {
    let nb = module.branch_count();
    let mut governed_by: Vec<Vec<usize>> = vec![Vec::new(); nb];
    let mut entry_governed = vec![false; nb];
    for co in &module.code_objects {
        if co.predicate_ids.is_empty() {
            continue;
        }
        let cfg = build_cfg(co);
        let cdg = control_dependence(&cfg);
        for &pid in &co.predicate_ids {
            let pblock = cfg.block_of_predicate(co, pid).expect("predicate block");
            let mut gov: Vec<usize> = cdg.deps[pblock]
                .iter()
                .filter_map(|&(q, j)| cfg.succs[q][j].branch)
                .collect();
            gov.sort_unstable();
            gov.dedup();
            let from_entry = cdg.deps[pblock].iter().any(|&(q, _)| q == cfg.entry);
            governed_by[2 * pid] = gov.clone();
            governed_by[2 * pid + 1] = gov;
            entry_governed[2 * pid] = from_entry;
            entry_governed[2 * pid + 1] = from_entry;
        }
    }

    let mut governs: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for b in 0..nb {
        for &g in &governed_by[b] {
            governs[g].push(b);
        }
    }

    let roots: Vec<usize> =
        (0..nb).filter(|&b| entry_governed[b] || governed_by[b].is_empty()).collect();
    let mut depth = vec![0usize; nb];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &r in &roots {
        depth[r] = 1;
        queue.push_back(r);
    }
    while let Some(b) = queue.pop_front() {
        for &d in &governs[b] {
            if depth[d] == 0 {
                depth[d] = depth[b] + 1;
                queue.push_back(d);
            }
        }
    }
    // Structured code cannot produce governance cycles, but stay total.
    for d in depth.iter_mut() {
        if *d == 0 {
            *d = 1;
        }
    }

    BranchDependence { n_branches: nb, governed_by, governs, entry_governed, depth, roots }
}
