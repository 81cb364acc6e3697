//! Reaching definitions over the statement tree.
//!
//! The analysis walks the tree in source order carrying, for every variable,
//! the set of statements whose definition may reach the current point.
//! Branches are analysed from the same entry state and merged by union, so a
//! definition inside a branch never kills one made outside it. Loops are
//! iterated until the state at the header stops growing, which adds the
//! loop-carried edges. `return`/`raise` end a path, `break` and `continue`
//! route their state to the loop exit and header respectively.

use std::collections::{BTreeMap, BTreeSet};

use crate::pystmt::{StatementTree, StmtKind};

type Defs = BTreeMap<String, BTreeSet<usize>>;

fn merge(into: &mut Defs, other: &Defs) {
    for (var, sites) in other {
        into.entry(var.clone()).or_default().extend(sites.iter().copied());
    }
}

fn merged(mut a: Defs, b: &Defs) -> Defs {
    merge(&mut a, b);
    a
}

#[derive(Default)]
struct LoopFlow {
    breaks: Defs,
    continues: Defs,
}

struct Analyzer<'t> {
    tree: &'t StatementTree,
    children: Vec<Vec<usize>>,
    edges: BTreeSet<(usize, usize)>,
}

impl<'t> Analyzer<'t> {
    fn new(tree: &'t StatementTree) -> Self {
        let mut children = vec![Vec::new(); tree.len() + 1];
        for s in &tree.statements {
            if !matches!(s.kind, StmtKind::FuncName | StmtKind::Params) {
                children[s.parent].push(s.index);
            }
        }
        Analyzer { tree, children, edges: BTreeSet::new() }
    }

    fn kind(&self, i: usize) -> StmtKind {
        self.tree.statements[i - 1].kind
    }

    /// Body statements of a header and the clause that continues it.
    fn split(&self, i: usize) -> (Vec<usize>, Option<usize>) {
        let mut body = Vec::new();
        let mut clause = None;
        for &c in &self.children[i] {
            if self.kind(c).is_continuation() {
                clause = Some(c);
            } else {
                body.push(c);
            }
        }
        (body, clause)
    }

    fn record_uses(&mut self, i: usize, state: &Defs) {
        for var in &self.tree.statements[i - 1].used_vars {
            if let Some(sites) = state.get(var) {
                for &j in sites {
                    if j != i {
                        self.edges.insert((i, j));
                    }
                }
            }
        }
    }

    fn apply_defs(&self, i: usize, state: &mut Defs) {
        for var in &self.tree.statements[i - 1].defined_vars {
            state.insert(var.clone(), BTreeSet::from([i]));
        }
    }

    fn block(&mut self, stmts: &[usize], mut state: Defs, loops: &mut Vec<LoopFlow>) -> Defs {
        for &s in stmts {
            state = self.statement(s, state, loops);
        }
        state
    }

    fn statement(&mut self, i: usize, mut state: Defs, loops: &mut Vec<LoopFlow>) -> Defs {
        match self.kind(i) {
            StmtKind::If | StmtKind::Elif => {
                self.record_uses(i, &state);
                self.apply_defs(i, &mut state);
                let (body, clause) = self.split(i);
                let taken = self.block(&body, state.clone(), loops);
                let other = match clause {
                    Some(c) => self.clause(c, state, loops),
                    None => state,
                };
                merged(taken, &other)
            }
            StmtKind::For | StmtKind::While => self.loop_statement(i, state, loops),
            StmtKind::Try => self.try_statement(i, state, loops),
            StmtKind::With => {
                self.record_uses(i, &state);
                self.apply_defs(i, &mut state);
                let (body, _) = self.split(i);
                self.block(&body, state, loops)
            }
            StmtKind::Return | StmtKind::Raise => {
                self.record_uses(i, &state);
                Defs::new()
            }
            StmtKind::Break => {
                if let Some(l) = loops.last_mut() {
                    merge(&mut l.breaks, &state);
                }
                Defs::new()
            }
            StmtKind::Continue => {
                if let Some(l) = loops.last_mut() {
                    merge(&mut l.continues, &state);
                }
                Defs::new()
            }
            _ => {
                self.record_uses(i, &state);
                self.apply_defs(i, &mut state);
                let (body, _) = self.split(i);
                if body.is_empty() {
                    state
                } else {
                    // generic block (match/case): may or may not run
                    let inner = self.block(&body, state.clone(), loops);
                    merged(inner, &state)
                }
            }
        }
    }

    fn clause(&mut self, c: usize, state: Defs, loops: &mut Vec<LoopFlow>) -> Defs {
        match self.kind(c) {
            StmtKind::Elif => self.statement(c, state, loops),
            _ => {
                let (body, _) = self.split(c);
                self.block(&body, state, loops)
            }
        }
    }

    fn loop_statement(&mut self, i: usize, entry: Defs, loops: &mut Vec<LoopFlow>) -> Defs {
        let is_for = self.kind(i) == StmtKind::For;
        let (body, clause) = self.split(i);
        let mut head = entry.clone();
        let breaks = loop {
            self.record_uses(i, &head);
            let mut body_in = head.clone();
            self.apply_defs(i, &mut body_in);
            loops.push(LoopFlow::default());
            let out = self.block(&body, body_in, loops);
            let flow = loops.pop().expect("loop frame");
            let back = merged(out, &flow.continues);
            let next = merged(entry.clone(), &back);
            if next == head {
                break flow.breaks;
            }
            head = next;
        };
        let mut exit = head;
        if !is_for {
            // a `while` condition runs on the exiting test too
            self.apply_defs(i, &mut exit);
        }
        let normal = match clause {
            Some(c) => {
                let (else_body, _) = self.split(c);
                self.block(&else_body, exit, loops)
            }
            None => exit,
        };
        merged(normal, &breaks)
    }

    fn subtree(&self, roots: &[usize], out: &mut Vec<usize>) {
        for &r in roots {
            out.push(r);
            self.subtree(&self.children[r], out);
        }
    }

    fn try_statement(&mut self, i: usize, entry: Defs, loops: &mut Vec<LoopFlow>) -> Defs {
        let (body, mut clause) = self.split(i);
        let mut normal = self.block(&body, entry.clone(), loops);
        // an exception may leave the body after any statement
        let mut handler_in = entry;
        let mut inner = Vec::new();
        self.subtree(&body, &mut inner);
        for s in inner {
            for var in &self.tree.statements[s - 1].defined_vars {
                handler_in.entry(var.clone()).or_default().insert(s);
            }
        }
        let mut handled = Defs::new();
        let mut finally_body = None;
        while let Some(c) = clause {
            let (cbody, next) = self.split(c);
            match self.kind(c) {
                StmtKind::Except => {
                    self.record_uses(c, &handler_in);
                    let mut h = handler_in.clone();
                    self.apply_defs(c, &mut h);
                    let out = self.block(&cbody, h, loops);
                    merge(&mut handled, &out);
                }
                StmtKind::Else => normal = self.block(&cbody, normal, loops),
                _ => finally_body = Some(cbody),
            }
            clause = next;
        }
        let after = merged(normal, &handled);
        match finally_body {
            Some(fb) => {
                let fin_in = merged(after, &handler_in);
                self.block(&fb, fin_in, loops)
            }
            None => after,
        }
    }
}

/// Data-dependency edges `(i, j)`: statement `i` reads a variable whose
/// definition at `j` may reach it. The parameter list is the definition
/// site of every parameter.
pub fn data_dependencies(tree: &StatementTree) -> BTreeSet<(usize, usize)> {
    let mut a = Analyzer::new(tree);
    let mut init = Defs::new();
    if tree.len() >= 2 {
        a.apply_defs(2, &mut init);
    }
    let top = a.children[0].clone();
    a.block(&top, init, &mut Vec::new());
    a.edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pystmt::segment;

    fn edges(src: &str) -> Vec<(usize, usize)> {
        data_dependencies(&segment(src).unwrap()).into_iter().collect()
    }

    #[test]
    fn return_depends_on_params() {
        assert_eq!(edges("def f(x):\n    return x\n"), [(3, 2)]);
    }

    #[test]
    fn while_condition_loop_carried() {
        let e = edges("def f():\n    i = 0\n    while i < 3:\n        i = i + 1\n");
        assert!(e.contains(&(4, 3)));
        assert!(e.contains(&(4, 5)));
        assert!(e.contains(&(5, 3)));
        assert!(!e.contains(&(5, 5)));
    }

    #[test]
    fn redefinition_kills() {
        let e = edges("def f():\n    x = 1\n    x = 2\n    return x\n");
        assert_eq!(e, [(5, 4)]);
    }

    #[test]
    fn branch_definition_does_not_kill_outer() {
        let e = edges("def f(c):\n    x = 1\n    if c:\n        x = 2\n    return x\n");
        assert!(e.contains(&(6, 3)) && e.contains(&(6, 5)));
    }

    #[test]
    fn if_else_both_define() {
        let e = edges("def f(c):\n    x = 1\n    if c:\n        x = 2\n    else:\n        x = 3\n    return x\n");
        assert!(e.contains(&(8, 5)) && e.contains(&(8, 7)));
        assert!(!e.contains(&(8, 3)));
    }

    #[test]
    fn return_in_branch_ends_path() {
        let e = edges("def f(c):\n    x = 1\n    if c:\n        x = 2\n        return x\n    return x\n");
        assert!(e.contains(&(7, 3)));
        assert!(!e.contains(&(7, 5)));
    }

    #[test]
    fn loop_carried_only_latest_definition() {
        let src = "def f(c):\n    while c:\n        y = x\n        x = 1\n        x = 2\n";
        let e = edges(src);
        assert!(e.contains(&(4, 6)));
        assert!(!e.contains(&(4, 5)));
    }

    #[test]
    fn break_and_continue_routing() {
        let src = "def f(a):\n    x = 0\n    for i in a:\n        if i:\n            x = 1\n            break\n        x = 2\n        continue\n    return x\n";
        let e = edges(src);
        // both the break path (x = 1) and the normal exit (x = 0 or x = 2) reach the return
        assert!(e.contains(&(10, 6)));
        assert!(e.contains(&(10, 3)));
        assert!(e.contains(&(10, 8)));
    }
}
