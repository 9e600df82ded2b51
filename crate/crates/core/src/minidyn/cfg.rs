//! Control-flow graphs over bytecode.
//!
//! Blocks are found with the classic leader rule. Node 0 is a synthetic
//! entry, the highest node a synthetic exit; `Return` and `Raise` edges go
//! to the exit. Every instruction belongs to exactly one block.

use super::bytecode::{false_branch, true_branch, CodeObject, Instr};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CfgEdge {
    pub to: usize,
    /// Branch id carried by this edge; `None` for unconditional edges.
    pub branch: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ControlFlowGraph {
    pub entry: usize,
    pub exit: usize,
    pub n_blocks: usize,
    pub succs: Vec<Vec<CfgEdge>>,
    pub preds: Vec<Vec<usize>>,
    /// Instruction ranges of real blocks; `None` for entry and exit.
    pub block_ranges: Vec<Option<(usize, usize)>>,
    /// Owning block of each instruction.
    pub block_of_instr: Vec<usize>,
}

impl ControlFlowGraph {
    /// Builds a graph from an explicit edge list, for tests that need
    /// arbitrary shapes. Nodes are 0 = entry, 1..=n_real real blocks,
    /// n_real + 1 = exit; edges may mention any of them and keep their
    /// listed order as successor order.
    pub fn synthetic(n_real: usize, edges: &[(usize, usize)]) -> ControlFlowGraph {
        let n_blocks = n_real + 2;
        let mut succs = vec![Vec::new(); n_blocks];
        let mut preds = vec![Vec::new(); n_blocks];
        for &(from, to) in edges {
            succs[from].push(CfgEdge { to, branch: None });
            preds[to].push(from);
        }
        ControlFlowGraph {
            entry: 0,
            exit: n_blocks - 1,
            n_blocks,
            succs,
            preds,
            block_ranges: vec![None; n_blocks],
            block_of_instr: Vec::new(),
        }
    }

    /// The block whose terminator owns the given predicate, if any.
    pub fn block_of_predicate(&self, code: &CodeObject, pred: usize) -> Option<usize> {
        for (i, instr) in code.code.iter().enumerate() {
            if let Instr::Branch { pred: p, .. } = instr {
                if *p == pred {
                    return Some(self.block_of_instr[i]);
                }
            }
        }
        None
    }
}

pub fn build_cfg(code: &CodeObject) -> ControlFlowGraph {
    let instrs = &code.code;
    assert!(!instrs.is_empty(), "code object has no instructions");

    let mut is_leader = vec![false; instrs.len()];
    is_leader[0] = true;
    for (i, instr) in instrs.iter().enumerate() {
        match instr {
            Instr::Branch { true_to, false_to, .. } => {
                is_leader[*true_to] = true;
                is_leader[*false_to] = true;
                if i + 1 < instrs.len() {
                    is_leader[i + 1] = true;
                }
            }
            Instr::Jump(t) => {
                is_leader[*t] = true;
                if i + 1 < instrs.len() {
                    is_leader[i + 1] = true;
                }
            }
            Instr::Return | Instr::Raise { .. } => {
                if i + 1 < instrs.len() {
                    is_leader[i + 1] = true;
                }
            }
            _ => {}
        }
    }

    // Real blocks are numbered 1.. in instruction order.
    let mut block_of_instr = vec![0usize; instrs.len()];
    let mut block_ranges: Vec<Option<(usize, usize)>> = vec![None];
    let mut current = 0usize;
    for i in 0..instrs.len() {
        if is_leader[i] {
            current = block_ranges.len();
            block_ranges.push(Some((i, i + 1)));
        } else if let Some((start, _)) = block_ranges[current] {
            block_ranges[current] = Some((start, i + 1));
        }
        block_of_instr[i] = current;
    }
    let n_real = block_ranges.len() - 1;
    let entry = 0;
    let exit = n_real + 1;
    let n_blocks = n_real + 2;
    block_ranges.push(None);

    let mut succs: Vec<Vec<CfgEdge>> = vec![Vec::new(); n_blocks];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
    let add_edge = |succs: &mut Vec<Vec<CfgEdge>>,
                    preds: &mut Vec<Vec<usize>>,
                    from: usize,
                    to: usize,
                    branch: Option<usize>| {
        succs[from].push(CfgEdge { to, branch });
        preds[to].push(from);
    };

    add_edge(&mut succs, &mut preds, entry, block_of_instr[0], None);
    // The usual entry-to-exit augmentation: it makes blocks that execute
    // unconditionally come out control dependent on the entry edge rather
    // than on nothing, which is how roots are recognised downstream.
    add_edge(&mut succs, &mut preds, entry, exit, None);
    for b in 1..=n_real {
        let (_, end) = block_ranges[b].unwrap();
        let last = end - 1;
        match &instrs[last] {
            Instr::Branch { pred, true_to, false_to, .. } => {
                add_edge(
                    &mut succs,
                    &mut preds,
                    b,
                    block_of_instr[*true_to],
                    Some(true_branch(*pred)),
                );
                add_edge(
                    &mut succs,
                    &mut preds,
                    b,
                    block_of_instr[*false_to],
                    Some(false_branch(*pred)),
                );
            }
            Instr::Jump(t) => add_edge(&mut succs, &mut preds, b, block_of_instr[*t], None),
            Instr::Return | Instr::Raise { .. } => {
                add_edge(&mut succs, &mut preds, b, exit, None)
            }
            _ => {
                // Fallthrough into the next block, which must exist because
                // compiled code always ends in Return.
                assert!(end < instrs.len(), "fallthrough off the end of code");
                add_edge(&mut succs, &mut preds, b, block_of_instr[end], None);
            }
        }
    }

    ControlFlowGraph { entry, exit, n_blocks, succs, preds, block_ranges, block_of_instr }
}

#[cfg(test)]
mod tests {
    use super::super::compiler::compile_module;
    use super::super::parser::parse_module;
    use super::*;

    fn cfg_of(source: &str, name: &str) -> (ControlFlowGraph, CodeObject) {
        let ast = parse_module("m", source).expect("parse");
        let module = compile_module(&ast).expect("compile");
        let co = module.code_object_named(name).unwrap().clone();
        (build_cfg(&co), co)
    }

    #[test]
    fn straight_line_code_is_one_block() {
        let (cfg, _) = cfg_of("def f(a, b):\n    return a + b\n", "f");
        assert_eq!(cfg.n_blocks, 3);
        assert_eq!(cfg.succs[cfg.entry][0], CfgEdge { to: 1, branch: None });
        assert_eq!(cfg.succs[cfg.entry][1], CfgEdge { to: cfg.exit, branch: None });
        assert_eq!(cfg.succs[1], vec![CfgEdge { to: cfg.exit, branch: None }]);
    }

    #[test]
    fn every_instruction_is_in_exactly_one_block() {
        let (cfg, co) = cfg_of(
            concat!(
                "def f(x):\n",
                "    if x > 0:\n",
                "        x = x - 1\n",
                "    else:\n",
                "        x = x + 1\n",
                "    while x > 10:\n",
                "        x = x // 2\n",
                "    return x\n",
            ),
            "f",
        );
        assert_eq!(cfg.block_of_instr.len(), co.code.len());
        let mut covered = vec![false; co.code.len()];
        for b in 1..cfg.n_blocks - 1 {
            let (start, end) = cfg.block_ranges[b].unwrap();
            for i in start..end {
                assert!(!covered[i], "instruction {i} in two blocks");
                covered[i] = true;
                assert_eq!(cfg.block_of_instr[i], b);
            }
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn if_else_with_join_forms_a_diamond() {
        let (cfg, co) = cfg_of(
            concat!(
                "def f(x):\n",
                "    if x > 0:\n",
                "        y = 1\n",
                "    else:\n",
                "        y = 2\n",
                "    return y\n",
            ),
            "f",
        );
        // entry, condition, two arms, join, exit.
        assert_eq!(cfg.n_blocks, 6);
        let cond = cfg.block_of_predicate(&co, 0).unwrap();
        assert_eq!(cfg.succs[cond].len(), 2);
        assert_eq!(cfg.succs[cond][0].branch, Some(0));
        assert_eq!(cfg.succs[cond][1].branch, Some(1));
        let t = cfg.succs[cond][0].to;
        let f = cfg.succs[cond][1].to;
        assert_ne!(t, f);
        assert_eq!(cfg.succs[t][0].to, cfg.succs[f][0].to, "arms join");
    }

    #[test]
    fn while_loop_has_a_back_edge() {
        let (cfg, co) = cfg_of(
            concat!(
                "def f(x):\n",
                "    while x > 0:\n",
                "        x = x - 1\n",
                "    return x\n",
            ),
            "f",
        );
        let cond = cfg.block_of_predicate(&co, 0).unwrap();
        let body = cfg.succs[cond][0].to;
        assert!(cfg.succs[body].iter().any(|e| e.to == cond), "body jumps back");
    }

    #[test]
    fn raise_routes_to_exit() {
        let (cfg, _) = cfg_of(
            concat!(
                "def f(x):\n",
                "    if x < 0:\n",
                "        raise ValueError(\"negative\")\n",
                "    return x\n",
            ),
            "f",
        );
        let raisers: Vec<usize> = (1..cfg.n_blocks - 1)
            .filter(|&b| cfg.succs[b] == vec![CfgEdge { to: cfg.exit, branch: None }])
            .collect();
        assert_eq!(raisers.len(), 2, "raise block and return block both reach exit");
    }

    #[test]
    fn synthetic_graph_keeps_edge_order() {
        let cfg = ControlFlowGraph::synthetic(3, &[(0, 1), (1, 2), (1, 3), (2, 4), (3, 4)]);
        assert_eq!(cfg.n_blocks, 5);
        assert_eq!(cfg.succs[1].len(), 2);
        assert_eq!(cfg.succs[1][0].to, 2);
        assert_eq!(cfg.succs[1][1].to, 3);
        assert_eq!(cfg.preds[4], vec![2, 3]);
    }
}
