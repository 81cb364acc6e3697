//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use depsearch::ingest::CorpusPair;
use depsearch::pystmt::{StatementTree, StmtKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BINARY_SEARCH: &str = "def binarySearch (arr, l, r, x):
    if r >= l:
        mid = int(l + (r - l)/2)
        if arr[mid] == x:
            return mid
        elif arr[mid] > x:
            return binarySearch(arr, l, mid-1, x)
        else:
            return binarySearch(arr, mid+1, r, x)
    else:
        return -1
";

/// A control-flow graph node. `stmt` is the statement whose uses are read
/// here and whose definitions are generated here.
struct Node {
    stmt: usize,
    uses: bool,
    defs: bool,
}

struct Loop {
    head: usize,
    breaks: Vec<usize>,
}

/// Reaching definitions on an explicit control-flow graph, solved with a
/// worklist. Independent of the library's structured analysis.
pub struct CfgOracle<'t> {
    tree: &'t StatementTree,
    nodes: Vec<Node>,
    succ: Vec<Vec<usize>>,
    children: HashMap<usize, Vec<usize>>,
    loops: Vec<Loop>,
}

impl<'t> CfgOracle<'t> {
    pub fn new(tree: &'t StatementTree) -> Self {
        let mut children: HashMap<usize, Vec<usize>> = HashMap::new();
        for s in &tree.statements {
            if !matches!(s.kind, StmtKind::FuncName | StmtKind::Params) {
                children.entry(s.parent).or_default().push(s.index);
            }
        }
        CfgOracle { tree, nodes: Vec::new(), succ: Vec::new(), children, loops: Vec::new() }
    }

    fn kind(&self, i: usize) -> StmtKind {
        self.tree.statements[i - 1].kind
    }

    fn node(&mut self, stmt: usize, uses: bool, defs: bool, preds: &[usize]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { stmt, uses, defs });
        self.succ.push(Vec::new());
        for &p in preds {
            self.succ[p].push(id);
        }
        id
    }

    fn link(&mut self, from: &[usize], to: usize) {
        for &f in from {
            self.succ[f].push(to);
        }
    }

    fn kids(&self, i: usize) -> (Vec<usize>, Option<usize>) {
        let all = self.children.get(&i).cloned().unwrap_or_default();
        let clause = all.iter().copied().find(|&c| self.kind(c).is_continuation());
        (all.into_iter().filter(|&c| !self.kind(c).is_continuation()).collect(), clause)
    }

    fn block(&mut self, stmts: &[usize], mut preds: Vec<usize>) -> Vec<usize> {
        for &s in stmts {
            preds = self.stmt(s, preds);
        }
        preds
    }

    /// Adds `i` after `preds`, returning the nodes that fall through.
    fn stmt(&mut self, i: usize, preds: Vec<usize>) -> Vec<usize> {
        let (body, clause) = self.kids(i);
        match self.kind(i) {
            StmtKind::If | StmtKind::Elif => {
                let h = self.node(i, true, true, &preds);
                let mut out = self.block(&body, vec![h]);
                match clause {
                    Some(c) if self.kind(c) == StmtKind::Elif => out.extend(self.stmt(c, vec![h])),
                    Some(c) => {
                        let e = self.node(c, true, true, &[h]);
                        let (eb, _) = self.kids(c);
                        out.extend(self.block(&eb, vec![e]));
                    }
                    None => out.push(h),
                }
                out
            }
            StmtKind::While | StmtKind::For => {
                let is_for = self.kind(i) == StmtKind::For;
                // a for header reads its iterable, then binds the target on entry
                let h = self.node(i, true, !is_for, &preds);
                let entry = if is_for { self.node(i, false, true, &[h]) } else { h };
                self.loops.push(Loop { head: h, breaks: Vec::new() });
                let out = self.block(&body, vec![entry]);
                self.link(&out, h);
                let lp = self.loops.pop().unwrap();
                let mut exit = match clause {
                    Some(c) => {
                        let e = self.node(c, true, true, &[h]);
                        let (eb, _) = self.kids(c);
                        self.block(&eb, vec![e])
                    }
                    None => vec![h],
                };
                exit.extend(lp.breaks);
                exit
            }
            StmtKind::Return | StmtKind::Raise => {
                self.node(i, true, true, &preds);
                Vec::new()
            }
            StmtKind::Break => {
                let n = self.node(i, true, true, &preds);
                self.loops.last_mut().expect("break inside loop").breaks.push(n);
                Vec::new()
            }
            StmtKind::Continue => {
                let n = self.node(i, true, true, &preds);
                let head = self.loops.last().expect("continue inside loop").head;
                self.succ[n].push(head);
                Vec::new()
            }
            StmtKind::Try | StmtKind::Except | StmtKind::Finally => panic!("oracle does not model try"),
            StmtKind::With => {
                let h = self.node(i, true, true, &preds);
                self.block(&body, vec![h])
            }
            _ => {
                let h = self.node(i, true, true, &preds);
                if body.is_empty() {
                    vec![h]
                } else {
                    let mut out = self.block(&body, vec![h]);
                    out.push(h);
                    out
                }
            }
        }
    }

    /// Edges `(use, def)` between distinct statements.
    pub fn edges(mut self) -> BTreeSet<(usize, usize)> {
        let tree = self.tree;
        if tree.len() < 2 {
            return BTreeSet::new();
        }
        let start = self.node(2, false, true, &[]);
        let top = self.kids(0).0;
        self.block(&top, vec![start]);

        let n = self.nodes.len();
        let mut preds = vec![Vec::new(); n];
        for (a, ss) in self.succ.iter().enumerate() {
            for &b in ss {
                preds[b].push(a);
            }
        }
        let defs_of = |k: usize| -> &BTreeSet<String> { &tree.statements[self.nodes[k].stmt - 1].defined_vars };
        let mut out: Vec<BTreeSet<(String, usize)>> = vec![BTreeSet::new(); n];
        let mut work: Vec<usize> = (0..n).collect();
        while let Some(k) = work.pop() {
            let mut inn: BTreeSet<(String, usize)> = BTreeSet::new();
            for &p in &preds[k] {
                inn.extend(out[p].iter().cloned());
            }
            let new = if self.nodes[k].defs {
                let kill = defs_of(k);
                let mut s: BTreeSet<_> = inn.into_iter().filter(|(v, _)| !kill.contains(v)).collect();
                s.extend(kill.iter().map(|v| (v.clone(), self.nodes[k].stmt)));
                s
            } else {
                inn
            };
            if new != out[k] {
                out[k] = new;
                work.extend(self.succ[k].iter().copied());
            }
        }

        let mut edges = BTreeSet::new();
        for (k, node) in self.nodes.iter().enumerate() {
            if !node.uses {
                continue;
            }
            let i = node.stmt;
            let used = &tree.statements[i - 1].used_vars;
            for &p in &preds[k] {
                for (v, j) in &out[p] {
                    if *j != i && used.contains(v) {
                        edges.insert((i, *j));
                    }
                }
            }
        }
        edges
    }
}

pub fn oracle_data_dependencies(tree: &StatementTree) -> BTreeSet<(usize, usize)> {
    CfgOracle::new(tree).edges()
}

const VARS: [&str; 5] = ["a", "b", "c", "x", "y"];

struct FnGen {
    rng: ChaCha8Rng,
    budget: usize,
    src: String,
}

impl FnGen {
    fn var(&mut self) -> &'static str {
        VARS[self.rng.random_range(0..VARS.len())]
    }

    fn line(&mut self, depth: usize, text: &str) {
        self.src.push_str(&"    ".repeat(depth + 1));
        self.src.push_str(text);
        self.src.push('\n');
        self.budget -= 1;
    }

    fn block(&mut self, depth: usize, in_loop: bool) {
        let n = self.rng.random_range(1..=3);
        for k in 0..n {
            if k > 0 && self.budget == 0 {
                break;
            }
            self.statement(depth, in_loop);
        }
    }

    fn simple(&mut self, depth: usize, in_loop: bool) {
        let (v, u, w) = (self.var(), self.var(), self.var());
        let text = match self.rng.random_range(0..10) {
            0..=3 => format!("{v} = {u} + {w}"),
            4 => format!("{v} += {u}"),
            5 => format!("print({u}, {w})"),
            6 => format!("return {u}"),
            7 if in_loop => "break".to_string(),
            8 if in_loop => "continue".to_string(),
            9 => "pass".to_string(),
            _ => format!("{v} = {u}"),
        };
        self.line(depth, &text);
    }

    fn statement(&mut self, depth: usize, in_loop: bool) {
        if self.budget < 2 || depth >= 3 || self.rng.random_bool(0.55) {
            return self.simple(depth, in_loop);
        }
        let (v, u) = (self.var(), self.var());
        match self.rng.random_range(0..4) {
            0 => {
                self.line(depth, &format!("if {v} > {u}:"));
                self.block(depth + 1, in_loop);
                while self.budget >= 2 && self.rng.random_bool(0.3) {
                    let w = self.var();
                    self.line(depth, &format!("elif {w}:"));
                    self.block(depth + 1, in_loop);
                }
                if self.budget >= 2 && self.rng.random_bool(0.5) {
                    self.line(depth, "else:");
                    self.block(depth + 1, in_loop);
                }
            }
            1 => {
                self.line(depth, &format!("for {v} in {u}:"));
                self.block(depth + 1, true);
                if self.budget >= 2 && self.rng.random_bool(0.2) {
                    self.line(depth, "else:");
                    self.block(depth + 1, in_loop);
                }
            }
            2 => {
                self.line(depth, &format!("while {v} < {u}:"));
                self.block(depth + 1, true);
                if self.budget >= 2 && self.rng.random_bool(0.2) {
                    self.line(depth, "else:");
                    self.block(depth + 1, in_loop);
                }
            }
            _ => {
                self.line(depth, &format!("with open({u}) as {v}:"));
                self.block(depth + 1, in_loop);
            }
        }
    }
}

/// A random function of at most `max_statements` statements (name and
/// parameter list included) over a handful of variables.
pub fn random_function(seed: u64, max_statements: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<&str> = VARS.iter().copied().filter(|_| rng.random_bool(0.4)).collect();
    let budget = rng.random_range(1..=max_statements - 2);
    let mut g = FnGen { rng, budget, src: format!("def f{seed}({}):\n", params.join(", ")) };
    g.block(0, false);
    while g.budget > 0 {
        g.statement(0, false);
    }
    g.src
}

/// Distinct, easily separable `<code, description>` pairs.
pub fn toy_pairs(n: usize) -> Vec<CorpusPair> {
    const VERBS: [&str; 8] = ["add", "scale", "merge", "parse", "load", "sort", "count", "clean"];
    const NOUNS: [&str; 8] = ["items", "rows", "names", "words", "files", "users", "prices", "scores"];
    (0..n)
        .map(|k| {
            let (verb, noun) = (VERBS[k % 8], NOUNS[(k / 8) % 8]);
            CorpusPair {
                id: format!("toy{k:03}"),
                code: format!(
                    "def {verb}_{noun}({noun}, limit):\n    result = {verb}({noun})\n    if limit:\n        result = result[:limit]\n    return result\n"
                ),
                description: format!("{verb} the {noun}"),
            }
        })
        .collect()
}
